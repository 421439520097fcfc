#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "doctest.h"
#include "lqr_oracle.hpp"
#include "olt/errors.hpp"
#include "olt/servo.hpp"
#include "test_util.hpp"

using namespace olt;
using olt::test::random_vector;

namespace {

RiccatiPolicy random_policy(std::mt19937_64& rng, int n) {
  RiccatiPolicy p;
  p.tau0 = random_vector(rng, n, 5.0);
  p.K0.resize(n, 2 * n);
  for (int c = 0; c < 2 * n; ++c) p.K0.col(c) = random_vector(rng, n, 10.0);
  p.x_lin = RobotState(random_vector(rng, n, 2.0), random_vector(rng, n, 1.0));
  return p;
}

}  // namespace

TEST_CASE("policy is exact at the linearization point") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const RiccatiPolicy p = random_policy(rng, 3);
    CHECK(policy_torque(p, p.x_lin).tau == p.tau0);
  }
}

TEST_CASE("policy increments are linear in the state offset") {
  std::mt19937_64 rng(12);
  const RiccatiPolicy p = random_policy(rng, 3);
  const Eigen::VectorXd base = policy_torque(p, p.x_lin).tau;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd delta = random_vector(rng, 6, 1.0);
    const RobotState x = RobotState::from_vector(p.x_lin.vector() + delta);
    const Eigen::VectorXd inc = policy_torque(p, x).tau - base;
    CHECK((inc - p.K0 * delta).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("policy reproduces the LQR feedback law") {
  OcpProblem prob;
  const Eigen::Vector2d mass(2.0, 0.5);
  prob.model = DoubleIntegrator{mass};
  prob.weights = CostWeights::defaults(Eigen::Vector2d(0.2, -0.1));
  prob.weights.w_v = 0.0;
  prob.x0 = RobotState(Eigen::Vector2d(1.0, -0.5), Eigen::Vector2d(0.3, 0.7));
  const OcpSolution s = solve_ocp(prob);
  const RiccatiPolicy policy = RiccatiPolicy::from_solution(s, 0.0);

  Eigen::VectorXd e0 = prob.x0.vector();
  e0.head(2) -= prob.weights.q_rest;
  const auto oracle = olt::test::lqr_oracle(mass, prob.dt, prob.horizon, prob.weights.q_x,
                                            prob.weights.q_u, e0);
  std::mt19937_64 rng(13);
  for (int i = 0; i < 50; ++i) {
    const RobotState x = RobotState::from_vector(prob.x0.vector() + random_vector(rng, 4, 0.5));
    Eigen::VectorXd e = x.vector();
    e.head(2) -= prob.weights.q_rest;
    CHECK((policy_torque(policy, x).tau - oracle.gains[0] * e).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("optional clamp") {
  RiccatiPolicy p;
  p.tau0 = Eigen::Vector2d(3.0, -7.0);
  p.K0 = Eigen::MatrixXd::Zero(2, 4);
  p.x_lin = RobotState::at_rest(Eigen::Vector2d::Zero());
  CHECK(policy_torque(p, p.x_lin).tau == p.tau0);
  const Eigen::VectorXd clamped = policy_torque(p, p.x_lin, {5.0}).tau;
  CHECK(clamped[0] == 3.0);
  CHECK(clamped[1] == -5.0);
}

TEST_CASE("dimension mismatch") {
  std::mt19937_64 rng(14);
  const RiccatiPolicy p = random_policy(rng, 3);
  CHECK_THROWS_AS(policy_torque(p, RobotState::at_rest(Eigen::Vector2d::Zero())), DimensionMismatch);
  RiccatiPolicy bad = p;
  bad.K0 = Eigen::MatrixXd::Zero(3, 5);
  CHECK_THROWS_AS(policy_torque(bad, p.x_lin), DimensionMismatch);
}

TEST_CASE("evaluation stays under 5 microseconds") {
  std::mt19937_64 rng(15);
  const RiccatiPolicy p = random_policy(rng, 3);
  const RobotState x = RobotState::from_vector(p.x_lin.vector() + random_vector(rng, 6, 0.1));
  constexpr int calls = 20000;
  double sink = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < calls; ++i) sink += policy_torque(p, x).tau[0];
  const double per_call =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / calls;
  CHECK(std::isfinite(sink));
  MESSAGE("policy_torque: " << per_call * 1e9 << " ns/call");
  CHECK(per_call < 5e-6);
}

TEST_CASE("mailbox hands over the newest snapshot") {
  PolicyMailbox box;
  CHECK(box.latest() == nullptr);
  RiccatiPolicy p;
  p.tau0 = Eigen::VectorXd::Zero(1);
  p.K0 = Eigen::MatrixXd::Zero(1, 2);
  p.x_lin = RobotState::at_rest(Eigen::VectorXd::Zero(1));

  std::thread writer([&] {
    for (long i = 1; i <= 2000; ++i) {
      RiccatiPolicy next = p;
      next.id = i;
      next.tau0[0] = static_cast<double>(i);
      box.publish(std::move(next));
    }
  });
  long last = 0;
  bool consistent = true;
  while (last < 2000) {
    if (auto snap = box.latest()) {
      consistent = consistent && snap->id >= last && snap->tau0[0] == static_cast<double>(snap->id);
      last = snap->id;
    }
  }
  writer.join();
  CHECK(consistent);
  CHECK(box.latest()->id == 2000);
}
