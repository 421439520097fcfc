#pragma once

#include <Eigen/Core>
#include <memory>
#include <mutex>
#include <optional>

#include "olt/ocp.hpp"
#include "olt/robot.hpp"

namespace olt {

/// Stage-0 linearization tau(x) = tau0 + K0 (x - x_lin) of an OCP solution.
struct RiccatiPolicy {
  Eigen::VectorXd tau0;
  Eigen::MatrixXd K0;
  RobotState x_lin;
  double solve_timestamp = 0.0;
  long id = 0;

  static RiccatiPolicy from_solution(const OcpSolution& solution, double timestamp, long id = 0);
};

/// Optional symmetric torque clamp; disabled by default.
struct TorqueLimit {
  std::optional<double> max_abs;
};

ControlCommand policy_torque(const RiccatiPolicy& policy, const RobotState& x,
                             const TorqueLimit& limit = {});

/// Latest-policy hand-off between the OCP worker (writer) and the control loop (reader).
class PolicyMailbox {
 public:
  void publish(RiccatiPolicy policy);
  /// nullptr until the first publish.
  std::shared_ptr<const RiccatiPolicy> latest() const;

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const RiccatiPolicy> current_;
};

}  // namespace olt
