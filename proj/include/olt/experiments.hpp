#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "olt/geometry.hpp"
#include "olt/ocp.hpp"
#include "olt/perception.hpp"
#include "olt/robot.hpp"
#include "olt/sched.hpp"
#include "olt/servo.hpp"

namespace olt {

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;
  bool contains(double t) const { return t >= start && t < end; }
};

struct Waypoint {
  double time = 0.0;
  Pose pose;
};

enum class TrajectoryKind { Static, Circular, Waypoints };

/// Object motion in the robot base frame.
struct ObjectTrajectory {
  TrajectoryKind kind = TrajectoryKind::Static;
  /// Static pose, or the pose at t = 0 on a circle.
  Pose pose;
  /// Circular: rotation of `pose` about the vertical axis through `center`.
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double angular_rate = 0.0;
  std::vector<Waypoint> waypoints;
  std::vector<TimeWindow> occlusions;

  Pose pose_at(double t) const;
  bool occluded_at(double t) const;
  void validate(const std::string& prefix = "object") const;
};

struct ScenarioConfig {
  ObjectTrajectory object;
  KinematicChain chain = make_arm3();
  Eigen::VectorXd q0;  ///< initial configuration (at rest); also the rest posture
  PipelineConfig pipeline;
  CostWeights weights;  ///< empty q_rest is filled with q0
  /// Desired object pose in the camera frame.
  Pose T_ref;
  double duration = 10.0;
  double ocp_period = 0.01;
  double control_period = 0.001;
  int horizon = 20;
  double ocp_dt = 0.02;
  SolverOptions solver;
  std::optional<double> torque_limit;
  std::uint64_t seed = 0;

  /// Copy with q_rest defaulted and estimator seeds derived from `seed`.
  ScenarioConfig resolved() const;
  void validate() const;
};

/// Arm3 looking at an object 0.5 m ahead, circling the base at `angular_rate`.
ScenarioConfig default_scenario(double angular_rate = 0.0);

/// Camera pose at q0 composed with T_ref: where an object sits so that l_v = 0 at start.
Pose object_at_reference(const ScenarioConfig& config);

// --- Recall -----------------------------------------------------------------

struct GroundTruth {
  std::int64_t frame_seq = 0;
  Pose pose;
};

/// Mean over the 10 x 10 grid of (1..10 cm, 5..50 deg) thresholds of the fraction
/// of ground-truth frames whose estimate is valid and strictly inside both.
/// Throws EmptySequence when truth is empty.
double pose_recall(std::span<const TimedPose> estimates, std::span<const GroundTruth> truth);

enum class RecallMethod { Localizer, TrackerInitLocalizer, Olt, OltNoTracker };
const char* to_string(RecallMethod m);
std::optional<RecallMethod> parse_recall_method(const std::string& name);

struct RecallPoint {
  double frequency = 0.0;
  RecallMethod method = RecallMethod::Olt;
  double recall = 0.0;
};

struct RecallCurve {
  std::vector<RecallPoint> points;
  /// Throws std::out_of_range if the pair was not evaluated.
  double at(RecallMethod method, double frequency) const;
};

/// Frames seen by a camera held at q0, at the given stream rate.
std::vector<TimedFrame> open_loop_frames(const ScenarioConfig& config, double frequency);

/// Per-frame estimates of one method on one frame sequence.
std::vector<TimedPose> run_recall_method(const ScenarioConfig& config,
                                         std::span<const TimedFrame> frames, double frequency,
                                         RecallMethod method);

RecallCurve run_recall_sweep(const ScenarioConfig& config, std::span<const double> frequencies,
                             std::span<const RecallMethod> methods);

// --- Step response and closed loop -------------------------------------------

struct ErrorSample {
  double time = 0.0;
  double trans = 0.0;     ///< m
  double rot = 0.0;       ///< rad
  double residual = 0.0;  ///< norm of the weighted log residual
};

struct ErrorTrace {
  double w_v = 0.0;
  std::vector<ErrorSample> samples;
  double steady_trans = 0.0;
  double steady_rot = 0.0;
  double steady_residual = 0.0;
  /// w_v * residual^2 at the end of the run.
  double steady_lv = 0.0;
  /// First time after which the residual stays within 10 % of its initial
  /// distance from the steady-state value. NaN if it never settles.
  double settling_time = 0.0;
};

/// Mean over the last `fraction` of samples.
void summarize_steady_state(ErrorTrace& trace, double fraction = 0.1);

/// Reference rotated about `axis` in the object frame at t = 0, perception
/// bypassed. Throws SolverDiverged.
std::vector<ErrorTrace> step_response(const ScenarioConfig& config, double rotation_deg,
                                      std::span<const double> w_v_list,
                                      const Eigen::Vector3d& axis = Eigen::Vector3d::UnitY());

/// T_ref * Rot(axis, deg).
Pose rotated_reference(const Pose& T_ref, const Eigen::Vector3d& axis, double rotation_deg);

struct ControlRecord {
  double time = 0.0;
  RobotState x;
  Eigen::VectorXd tau;
  long policy_id = -1;  ///< -1: gravity hold before the first policy
  double trans = 0.0;
  double rot = 0.0;
  double residual = 0.0;
  bool estimate_valid = false;
};

struct SolveRecord {
  double time = 0.0;
  long policy_id = 0;
  std::int64_t estimate_seq = -1;  ///< -1: no estimate used
  bool holding = false;           ///< reference held from an earlier valid estimate
  OcpSolution solution;
};

struct ClosedLoopLog {
  std::vector<ControlRecord> control;
  std::vector<RiccatiPolicy> policies;  ///< indexed by policy_id
  std::vector<SolveRecord> solves;
  std::vector<TimedPose> estimates;
  std::vector<PipelineEvent> events;
  std::vector<TimedFrame> frames;
  std::vector<TraceEntry> trace;
  bool aborted = false;
  std::string abort_reason;

  double median_residual(double from_time = 0.0) const;
  double median_trans(double from_time = 0.0) const;
};

/// Full loop on the virtual clock: camera frames from FK, perception, OCP at
/// ocp_period, Riccati policy at control_period, plant integration.
ClosedLoopLog run_closed_loop(const ScenarioConfig& config,
                              PipelineMode mode = PipelineMode::Olt);

/// Largest |tau - policy_torque(policy, x)| over the log (0 for a consistent log).
double torque_replay_error(const ClosedLoopLog& log, const ScenarioConfig& config);

// --- Benchmarks ---------------------------------------------------------------

struct BenchResult {
  double ocp_solve_mean = 0.0;  ///< seconds
  double ocp_solve_max = 0.0;
  double policy_eval_mean = 0.0;
  int solves = 0;
  /// Wall-clock perception demo, filled when requested.
  std::size_t wallclock_estimates = 0;
  std::size_t wallclock_frames = 0;
  double wallclock_max_age = 0.0;
};

BenchResult run_bench(const ScenarioConfig& config, bool wallclock_demo, double demo_seconds = 2.0);

}  // namespace olt
