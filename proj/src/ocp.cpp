#include "olt/ocp.hpp"

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "olt/errors.hpp"

namespace olt {
namespace {

void require(bool ok, const std::string& field, const std::string& constraint) {
  if (!ok) throw ValidationError(field, constraint);
}

bool non_negative(const Eigen::VectorXd& v) { return (v.array() >= 0.0).all(); }

Eigen::VectorXd rest_state(const CostWeights& w) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * w.q_rest.size());
  x.head(w.q_rest.size()) = w.q_rest;
  return x;
}

// Central differences of g(q) = gravity torque.
Eigen::MatrixXd gravity_jacobian(const PlantModel& model, const Eigen::VectorXd& q, double h) {
  const Eigen::Index n = q.size();
  Eigen::MatrixXd g(n, n);
  Eigen::VectorXd qp = q, qm = q;
  for (Eigen::Index j = 0; j < n; ++j) {
    qp[j] += h;
    qm[j] -= h;
    g.col(j) = (gravity_torque(model, qp) - gravity_torque(model, qm)) / (2.0 * h);
    qp[j] = q[j];
    qm[j] = q[j];
  }
  return g;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> residual_jacobian(const KinematicChain& chain,
                                                           const Eigen::VectorXd& q,
                                                           const TrackingReference& ref,
                                                           double rot_weight, double h) {
  const Eigen::Index n = q.size();
  Eigen::Matrix<double, 6, Eigen::Dynamic> j(6, n);
  Eigen::VectorXd qp = q, qm = q;
  for (Eigen::Index c = 0; c < n; ++c) {
    qp[c] += h;
    qm[c] -= h;
    j.col(c) = (tracking_residual(chain, qp, ref, rot_weight) -
                tracking_residual(chain, qm, ref, rot_weight)) /
               (2.0 * h);
    qp[c] = q[c];
    qm[c] = q[c];
  }
  return j;
}

void add_tracking_terms(const OcpProblem& p, const RobotState& x, double h, CostDerivatives& d) {
  if (p.weights.w_v == 0.0) return;
  const KinematicChain& chain = *p.chain();
  const Eigen::Index n = x.q.size();
  const Vector6d r = tracking_residual(chain, x.q, *p.reference, p.weights.rot_weight);
  const auto j = residual_jacobian(chain, x.q, *p.reference, p.weights.rot_weight, h);
  d.lx.head(n) += 2.0 * p.weights.w_v * j.transpose() * r;
  d.lxx.topLeftCorner(n, n) += 2.0 * p.weights.w_v * j.transpose() * j;
}

void add_state_terms(const OcpProblem& p, const RobotState& x, CostDerivatives& d) {
  const Eigen::VectorXd e = x.vector() - rest_state(p.weights);
  d.lx += 2.0 * p.weights.q_x.cwiseProduct(e);
  d.lxx.diagonal() += 2.0 * p.weights.q_x;
}

double total_cost(const OcpProblem& p, const std::vector<Eigen::VectorXd>& xs,
                  const std::vector<Eigen::VectorXd>& us) {
  double j = 0.0;
  for (int i = 0; i < p.horizon; ++i) j += running_cost(p, RobotState::from_vector(xs[i]), us[i]);
  j += terminal_cost(p, RobotState::from_vector(xs[p.horizon]));
  return j;
}

struct Trajectory {
  std::vector<Eigen::VectorXd> xs, us;
  double cost = 0.0;
};

Trajectory rollout(const OcpProblem& p, const std::vector<Eigen::VectorXd>& us) {
  Trajectory t;
  t.us = us;
  t.xs.resize(p.horizon + 1);
  t.xs[0] = p.x0.vector();
  for (int i = 0; i < p.horizon; ++i) t.xs[i + 1] = discrete_dynamics(p, t.xs[i], us[i]);
  t.cost = total_cost(p, t.xs, t.us);
  return t;
}

struct BackwardResult {
  std::vector<Eigen::VectorXd> k;
  std::vector<Eigen::MatrixXd> K;
  double d1 = 0.0;  // sum k' Qu
  double d2 = 0.0;  // sum 0.5 k' Quu k
  double gradient = 0.0;
};

struct StageModel {
  Eigen::MatrixXd fx, fu;
  CostDerivatives cost;
};

bool backward_pass(const std::vector<StageModel>& stages, const CostDerivatives& terminal,
                   double reg, BackwardResult& out) {
  const int m = static_cast<int>(stages.size());
  out.k.assign(m, {});
  out.K.assign(m, {});
  out.d1 = out.d2 = out.gradient = 0.0;
  Eigen::VectorXd vx = terminal.lx;
  Eigen::MatrixXd vxx = terminal.lxx;
  for (int i = m - 1; i >= 0; --i) {
    const StageModel& s = stages[i];
    const Eigen::VectorXd qx = s.cost.lx + s.fx.transpose() * vx;
    const Eigen::VectorXd qu = s.cost.lu + s.fu.transpose() * vx;
    const Eigen::MatrixXd vxx_fx = vxx * s.fx;
    const Eigen::MatrixXd qxx = s.cost.lxx + s.fx.transpose() * vxx_fx;
    const Eigen::MatrixXd quu = s.cost.luu + s.fu.transpose() * vxx * s.fu;
    const Eigen::MatrixXd qux = s.cost.lux + s.fu.transpose() * vxx_fx;

    Eigen::MatrixXd quu_reg = quu;
    quu_reg.diagonal().array() += reg;
    Eigen::LLT<Eigen::MatrixXd> llt(quu_reg);
    if (llt.info() != Eigen::Success) return false;

    out.k[i] = -llt.solve(qu);
    out.K[i] = -llt.solve(qux);
    const Eigen::VectorXd& k = out.k[i];
    const Eigen::MatrixXd& gain = out.K[i];

    vx = qx + gain.transpose() * quu * k + gain.transpose() * qu + qux.transpose() * k;
    vxx = qxx + gain.transpose() * quu * gain + gain.transpose() * qux + qux.transpose() * gain;
    vxx = 0.5 * (vxx + vxx.transpose()).eval();

    out.d1 += k.dot(qu);
    out.d2 += 0.5 * k.dot(quu * k);
    out.gradient = std::max(out.gradient, qu.cwiseAbs().maxCoeff());
  }
  return true;
}

double safe_cost(const OcpProblem& p, Trajectory& t) {
  try {
    t.cost = total_cost(p, t.xs, t.us);
  } catch (const CostSingularity&) {
    t.cost = std::numeric_limits<double>::infinity();
  }
  if (!std::isfinite(t.cost)) t.cost = std::numeric_limits<double>::infinity();
  return t.cost;
}

}  // namespace

CostWeights CostWeights::defaults(const Eigen::VectorXd& q_rest) {
  const Eigen::Index n = q_rest.size();
  CostWeights w;
  w.q_x = Eigen::VectorXd(2 * n);
  w.q_x << Eigen::VectorXd::Constant(n, 0.3), Eigen::VectorXd::Constant(n, 3.0);
  w.q_u = Eigen::VectorXd::Constant(n, 0.1);
  w.q_rest = q_rest;
  return w;
}

const KinematicChain* OcpProblem::chain() const { return std::get_if<KinematicChain>(&model); }

void OcpProblem::validate() const {
  const int n = dof();
  require(horizon >= 1, "ocp.horizon", "must be >= 1");
  require(dt > 0.0, "ocp.dt", "must be > 0");
  require(weights.w_v >= 0.0, "weights.w_v", "must be >= 0");
  require(weights.q_x.size() == 2 * n, "weights.q_x", "needs " + std::to_string(2 * n) + " entries");
  require(weights.q_u.size() == n, "weights.q_u", "needs " + std::to_string(n) + " entries");
  require(weights.q_rest.size() == n, "weights.q_rest", "needs " + std::to_string(n) + " entries");
  require(non_negative(weights.q_x), "weights.q_x", "entries must be >= 0");
  require(non_negative(weights.q_u), "weights.q_u", "entries must be >= 0");
  require(weights.rot_weight >= 0.0, "weights.rot_weight", "must be >= 0");
  require(x0.q.size() == n && x0.dq.size() == n, "x0", "dimension does not match the plant");
  if (weights.w_v > 0.0) {
    require(chain() != nullptr, "weights.w_v", "tracking cost needs a kinematic chain");
    require(reference.has_value(), "reference", "required when w_v > 0");
    require(reference->q_measured.size() == n, "reference.q_measured",
            "dimension does not match the chain");
  }
}

Vector6d tracking_residual(const KinematicChain& chain, const Eigen::VectorXd& q,
                           const TrackingReference& ref, double rot_weight) {
  const Pose object_in_base = forward_kinematics(chain, ref.q_measured) * ref.object_in_camera;
  const Pose error = inverse(object_in_base) * forward_kinematics(chain, q) * ref.desired;
  Vector6d r;
  try {
    r = log(error).vector();
  } catch (const AngleNearPi& e) {
    throw CostSingularity(std::string("tracking cost: ") + e.what());
  }
  r.tail<3>() *= rot_weight;
  return r;
}

double tracking_cost(const KinematicChain& chain, const Eigen::VectorXd& q,
                     const TrackingReference& ref, double rot_weight) {
  return tracking_residual(chain, q, ref, rot_weight).squaredNorm();
}

double state_cost(const RobotState& x, const CostWeights& weights) {
  if (x.q.size() != weights.q_rest.size() || x.dq.size() != x.q.size() ||
      weights.q_x.size() != 2 * x.q.size()) {
    throw DimensionMismatch("state_cost: state and weight dimensions differ");
  }
  const Eigen::VectorXd e = x.vector() - rest_state(weights);
  return e.dot(weights.q_x.cwiseProduct(e));
}

double control_cost(const PlantModel& model, const RobotState& x, const Eigen::VectorXd& u,
                    const CostWeights& weights) {
  if (u.size() != x.q.size() || weights.q_u.size() != u.size()) {
    throw DimensionMismatch("control_cost: control and weight dimensions differ");
  }
  const Eigen::VectorXd e = u - gravity_torque(model, x.q);
  return e.dot(weights.q_u.cwiseProduct(e));
}

double running_cost(const OcpProblem& p, const RobotState& x, const Eigen::VectorXd& u) {
  return terminal_cost(p, x) + control_cost(p.model, x, u, p.weights);
}

double terminal_cost(const OcpProblem& p, const RobotState& x) {
  double l = state_cost(x, p.weights);
  if (p.weights.w_v != 0.0) {
    l += p.weights.w_v * tracking_cost(*p.chain(), x.q, *p.reference, p.weights.rot_weight);
  }
  return l;
}

CostDerivatives terminal_cost_derivatives(const OcpProblem& p, const RobotState& x,
                                          double fd_step) {
  const Eigen::Index nx = 2 * x.q.size();
  CostDerivatives d;
  d.lx = Eigen::VectorXd::Zero(nx);
  d.lxx = Eigen::MatrixXd::Zero(nx, nx);
  add_state_terms(p, x, d);
  add_tracking_terms(p, x, fd_step, d);
  return d;
}

CostDerivatives cost_derivatives(const OcpProblem& p, const RobotState& x,
                                 const Eigen::VectorXd& u, double fd_step) {
  CostDerivatives d = terminal_cost_derivatives(p, x, fd_step);
  const Eigen::Index n = x.q.size();
  const Eigen::VectorXd& qu = p.weights.q_u;
  const Eigen::VectorXd r = u - gravity_torque(p.model, x.q);
  d.lu = 2.0 * qu.cwiseProduct(r);
  d.luu = Eigen::MatrixXd(2.0 * qu.asDiagonal());
  d.lux = Eigen::MatrixXd::Zero(n, 2 * n);
  if (p.chain() != nullptr && p.chain()->gravity().squaredNorm() > 0.0) {
    const Eigen::MatrixXd g = gravity_jacobian(p.model, x.q, fd_step);
    const Eigen::MatrixXd qu_g = qu.asDiagonal() * g;
    d.lx.head(n) -= 2.0 * g.transpose() * qu.cwiseProduct(r);
    d.lxx.topLeftCorner(n, n) += 2.0 * g.transpose() * qu_g;
    d.lux.leftCols(n) = -2.0 * qu_g;
  }
  return d;
}

Eigen::VectorXd discrete_dynamics(const OcpProblem& p, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u) {
  return integrate_plant(p.model, RobotState::from_vector(x), {u}, p.dt).vector();
}

void dynamics_jacobians(const OcpProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                        Eigen::MatrixXd& fx, Eigen::MatrixXd& fu, double fd_step) {
  const Eigen::Index n = u.size();
  const double dt = p.dt;
  // Jacobian of ddq over z = (q, dq, u).
  Eigen::MatrixXd da(n, 3 * n);
  if (const auto* di = std::get_if<DoubleIntegrator>(&p.model)) {
    da.setZero();
    da.rightCols(n) = di->mass_diag.cwiseInverse().asDiagonal();
  } else {
    Eigen::VectorXd z(3 * n);
    z << x, u;
    Eigen::VectorXd zp = z, zm = z;
    for (Eigen::Index c = 0; c < 3 * n; ++c) {
      zp[c] += fd_step;
      zm[c] -= fd_step;
      da.col(c) = (aba(p.model, zp.head(n), zp.segment(n, n), zp.tail(n)) -
                   aba(p.model, zm.head(n), zm.segment(n, n), zm.tail(n))) /
                  (2.0 * fd_step);
      zp[c] = z[c];
      zm[c] = z[c];
    }
  }
  Eigen::MatrixXd ddq_next = dt * da;
  ddq_next.block(0, n, n, n) += Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd q_next = dt * ddq_next;
  q_next.leftCols(n) += Eigen::MatrixXd::Identity(n, n);

  fx.resize(2 * n, 2 * n);
  fu.resize(2 * n, n);
  fx.topRows(n) = q_next.leftCols(2 * n);
  fx.bottomRows(n) = ddq_next.leftCols(2 * n);
  fu.topRows(n) = q_next.rightCols(n);
  fu.bottomRows(n) = ddq_next.rightCols(n);
}

OcpSolution solve_ocp(const OcpProblem& p, const OcpSolution* warm_start,
                      const SolverOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  p.validate();
  const int m = p.horizon;
  const int n = p.dof();

  std::vector<Eigen::VectorXd> us;
  if (warm_start != nullptr && static_cast<int>(warm_start->us.size()) == m &&
      warm_start->us.front().size() == n) {
    const int shift = std::clamp(opt.warm_start_shift, 0, m - 1);
    for (int i = 0; i < m; ++i) us.push_back(warm_start->us[std::min(i + shift, m - 1)]);
  } else {
    us.assign(m, gravity_torque(p.model, p.x0.q));
  }

  Trajectory traj = rollout(p, us);
  if (!std::isfinite(traj.cost)) throw NonFiniteCost("initial rollout cost is not finite");

  OcpSolution sol;
  sol.cost_trace.push_back(traj.cost);
  std::vector<StageModel> stages(m);
  CostDerivatives terminal;
  BackwardResult bw;
  double reg = 0.0;
  bool have_gains = false;

  while (sol.iterations < opt.max_iterations) {
    ++sol.iterations;
    for (int i = 0; i < m; ++i) {
      dynamics_jacobians(p, traj.xs[i], traj.us[i], stages[i].fx, stages[i].fu, opt.fd_step);
      stages[i].cost = cost_derivatives(p, RobotState::from_vector(traj.xs[i]), traj.us[i],
                                        opt.fd_step);
    }
    terminal = terminal_cost_derivatives(p, RobotState::from_vector(traj.xs[m]), opt.fd_step);

    while (!backward_pass(stages, terminal, reg, bw)) {
      reg = std::max(reg * opt.reg_factor, opt.reg_min);
      if (reg > opt.reg_max) {
        throw BackwardPassFailure("Q_uu not positive definite at regularization " +
                                  std::to_string(opt.reg_max));
      }
    }
    have_gains = true;
    sol.gradient_norm = bw.gradient;

    if (bw.gradient < opt.gradient_tolerance || -(bw.d1 + bw.d2) < opt.cost_tolerance) {
      sol.converged = true;
      break;
    }

    bool accepted = false;
    for (double alpha = 1.0; alpha >= opt.ls_min_step; alpha *= opt.ls_factor) {
      Trajectory trial;
      trial.xs.resize(m + 1);
      trial.us.resize(m);
      trial.xs[0] = traj.xs[0];
      for (int i = 0; i < m; ++i) {
        trial.us[i] = traj.us[i] + alpha * bw.k[i] + bw.K[i] * (trial.xs[i] - traj.xs[i]);
        trial.xs[i + 1] = discrete_dynamics(p, trial.xs[i], trial.us[i]);
      }
      const double decrease = traj.cost - safe_cost(p, trial);
      const double expected = -(alpha * bw.d1 + alpha * alpha * bw.d2);
      if (std::isfinite(trial.cost) && decrease >= opt.armijo * expected) {
        traj = std::move(trial);
        accepted = true;
        ++sol.accepted_steps;
        sol.cost_trace.push_back(traj.cost);
        if (decrease < opt.cost_tolerance) sol.converged = true;
        break;
      }
    }

    if (accepted) {
      reg /= opt.reg_factor;
      if (reg < opt.reg_min) reg = 0.0;
      if (sol.converged) break;
    } else {
      reg = std::max(reg * opt.reg_factor, opt.reg_min);
      if (reg > opt.reg_max) break;
    }
  }

  if (!have_gains) throw BackwardPassFailure("no backward pass completed");
  sol.xs = std::move(traj.xs);
  sol.us = std::move(traj.us);
  sol.gains = std::move(bw.K);
  sol.cost = traj.cost;
  sol.K0 = sol.gains.front();
  sol.tau0 = sol.us.front();
  sol.x_lin = RobotState::from_vector(sol.xs.front());
  sol.regularization = reg;
  sol.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

const OcpSolution& MpcSolver::solve(const OcpProblem& problem) {
  OcpSolution next = solve_ocp(problem, last_ ? &*last_ : nullptr, options_);
  last_ = std::move(next);
  return *last_;
}

void write_diagnostics_header(std::ostream& os) {
  os << "time,iterations,cost,gradient_norm,regularization,wall_time,converged\n";
}

void write_diagnostics_row(std::ostream& os, double time, const OcpSolution& s) {
  os << time << ',' << s.iterations << ',' << s.cost << ',' << s.gradient_norm << ','
     << s.regularization << ',' << s.wall_time << ',' << (s.converged ? 1 : 0) << '\n';
}

}  // namespace olt
