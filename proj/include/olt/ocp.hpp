#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <vector>

#include "olt/geometry.hpp"
#include "olt/robot.hpp"

namespace olt {

/// Weights of l = w_v * l_v + l_x + l_u. Diagonals are stored as vectors.
struct CostWeights {
  double w_v = 20.0;
  Eigen::VectorXd q_x;     ///< over (q, dq)
  Eigen::VectorXd q_u;     ///< over tau
  Eigen::VectorXd q_rest;  ///< rest configuration
  double rot_weight = 1.0; ///< scales the angular part of the log residual

  /// 0.3 on angles, 3 on velocities, 0.1 on torques, w_v = 20.
  static CostWeights defaults(const Eigen::VectorXd& q_rest);
};

/// Measured object pose T_k (camera frame), the configuration q_k at which it
/// was measured, and the desired camera-to-object pose T_ref.
struct TrackingReference {
  Pose object_in_camera;
  Eigen::VectorXd q_measured;
  Pose desired;
};

struct OcpProblem {
  PlantModel model;
  CostWeights weights;
  std::optional<TrackingReference> reference;  ///< required when w_v > 0
  int horizon = 20;
  double dt = 0.02;
  RobotState x0;

  /// Chain of the model, or nullptr for a double integrator.
  const KinematicChain* chain() const;
  int dof() const { return plant_dof(model); }
  /// Throws ValidationError naming the offending field.
  void validate() const;
};

struct SolverOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-9;
  double cost_tolerance = 1e-10;
  double reg_min = 1e-9;
  double reg_max = 1e6;
  double reg_factor = 10.0;
  double ls_factor = 0.5;
  double ls_min_step = 1.0 / 64.0;
  double armijo = 0.0;
  double fd_step = 1e-6;
  /// Stages dropped from the front of a warm start.
  int warm_start_shift = 1;
};

struct OcpSolution {
  std::vector<Eigen::VectorXd> xs;  ///< M + 1 stacked states (q, dq)
  std::vector<Eigen::VectorXd> us;  ///< M controls
  std::vector<Eigen::MatrixXd> gains;  ///< feedback gain of every stage
  Eigen::MatrixXd K0;
  Eigen::VectorXd tau0;
  RobotState x_lin;
  double cost = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  double regularization = 0.0;
  double wall_time = 0.0;  ///< seconds
  std::vector<double> cost_trace;  ///< cost after the rollout and each accepted step
};

/// Gradient and Gauss-Newton Hessian blocks of a stage cost.
struct CostDerivatives {
  Eigen::VectorXd lx, lu;
  Eigen::MatrixXd lxx, luu, lux;
};

/// Six-vector W * log((T_BC(q_k) T_k)^-1 T_BC(q) T_ref). Throws CostSingularity.
Vector6d tracking_residual(const KinematicChain& chain, const Eigen::VectorXd& q,
                           const TrackingReference& ref, double rot_weight);
double tracking_cost(const KinematicChain& chain, const Eigen::VectorXd& q,
                     const TrackingReference& ref, double rot_weight);
double state_cost(const RobotState& x, const CostWeights& weights);
/// Penalizes departure from the gravity-compensating torque at x.q.
double control_cost(const PlantModel& model, const RobotState& x, const Eigen::VectorXd& u,
                    const CostWeights& weights);

double running_cost(const OcpProblem& problem, const RobotState& x, const Eigen::VectorXd& u);
double terminal_cost(const OcpProblem& problem, const RobotState& x);

CostDerivatives cost_derivatives(const OcpProblem& problem, const RobotState& x,
                                 const Eigen::VectorXd& u, double fd_step = 1e-6);
/// lu, luu and lux are empty.
CostDerivatives terminal_cost_derivatives(const OcpProblem& problem, const RobotState& x,
                                          double fd_step = 1e-6);

/// Discrete dynamics x' = f(x, u) and its Jacobians.
Eigen::VectorXd discrete_dynamics(const OcpProblem& problem, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u);
void dynamics_jacobians(const OcpProblem& problem, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, Eigen::MatrixXd& fx, Eigen::MatrixXd& fu,
                        double fd_step = 1e-6);

/// Multiple-shooting DDP with a feasible rollout. `warm_start` seeds the
/// controls (shifted by options.warm_start_shift stages).
OcpSolution solve_ocp(const OcpProblem& problem, const OcpSolution* warm_start = nullptr,
                      const SolverOptions& options = {});

/// Stateful receding-horizon wrapper that warm-starts from its previous solve.
class MpcSolver {
 public:
  explicit MpcSolver(SolverOptions options = {}) : options_(options) {}

  const OcpSolution& solve(const OcpProblem& problem);
  void reset() { last_.reset(); }
  const std::optional<OcpSolution>& last() const { return last_; }
  const SolverOptions& options() const { return options_; }

 private:
  SolverOptions options_;
  std::optional<OcpSolution> last_;
};

/// Solver diagnostics CSV: iterations,cost,gradient_norm,regularization,wall_time.
void write_diagnostics_header(std::ostream& os);
void write_diagnostics_row(std::ostream& os, double time, const OcpSolution& solution);

}  // namespace olt
