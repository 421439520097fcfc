#include "olt/servo.hpp"

#include "olt/errors.hpp"

namespace olt {

RiccatiPolicy RiccatiPolicy::from_solution(const OcpSolution& s, double timestamp, long id) {
  return {s.tau0, s.K0, s.x_lin, timestamp, id};
}

ControlCommand policy_torque(const RiccatiPolicy& p, const RobotState& x, const TorqueLimit& limit) {
  const Eigen::Index n = p.tau0.size();
  if (x.q.size() != n || x.dq.size() != n || p.x_lin.q.size() != n || p.K0.rows() != n ||
      p.K0.cols() != 2 * n) {
    throw DimensionMismatch("policy_torque: state, gain and feedforward sizes disagree");
  }
  ControlCommand u;
  u.tau = p.tau0 + p.K0.leftCols(n) * (x.q - p.x_lin.q) + p.K0.rightCols(n) * (x.dq - p.x_lin.dq);
  if (limit.max_abs) u.tau = u.tau.cwiseMax(-*limit.max_abs).cwiseMin(*limit.max_abs);
  return u;
}

void PolicyMailbox::publish(RiccatiPolicy policy) {
  auto next = std::make_shared<const RiccatiPolicy>(std::move(policy));
  std::lock_guard<std::mutex> lock(mutex_);
  current_ = std::move(next);
}

std::shared_ptr<const RiccatiPolicy> PolicyMailbox::latest() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return current_;
}

}  // namespace olt
