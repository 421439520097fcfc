#include "olt/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>
#include <thread>

#include "olt/errors.hpp"

namespace olt {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void require(bool ok, const std::string& field, const std::string& constraint) {
  if (!ok) throw ValidationError(field, constraint);
}

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

double median(std::vector<double> v) {
  if (v.empty()) throw EmptySequence("median of an empty sequence");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

// Camera-frame error of the true object pose against the desired one.
ErrorSample view_error(double t, const Pose& object_in_camera, const Pose& desired,
                       double rot_weight) {
  ErrorSample e;
  e.time = t;
  const PoseError d = pose_distance(object_in_camera, desired);
  e.trans = d.trans;
  e.rot = d.rot;
  try {
    Vector6d r = log(inverse(object_in_camera) * desired).vector();
    r.tail<3>() *= rot_weight;
    e.residual = r.norm();
  } catch (const AngleNearPi&) {
    e.residual = std::numeric_limits<double>::quiet_NaN();
  }
  return e;
}

enum class Feedback { Exact, Olt, LocalizerOnly };

// Shared wiring of step response and closed loop. `config` must be resolved;
// its T_ref is the desired pose during the whole run.
ClosedLoopLog simulate_loop(const ScenarioConfig& config, Feedback feedback) {
  ClosedLoopLog log;
  Simulator sim;
  const KinematicChain& chain = config.chain;
  const Pose desired = config.T_ref;
  const PlantModel plant = chain;

  RobotState state = RobotState::at_rest(config.q0);
  RobotState measured = state;
  PolicyMailbox mailbox;
  MpcSolver mpc(config.solver);
  const TorqueLimit limit{config.torque_limit};

  std::optional<PerceptionPipeline> pipeline;
  if (feedback != Feedback::Exact) {
    pipeline.emplace(sim, config.pipeline,
                     feedback == Feedback::Olt ? PipelineMode::Olt : PipelineMode::LocalizerOnly);
  }
  std::map<std::int64_t, Eigen::VectorXd> q_at_frame;
  std::optional<TrackingReference> held;
  std::optional<std::int64_t> held_seq;

  auto abort = [&](Simulator& s, const std::string& why) {
    log.aborted = true;
    log.abort_reason = why;
    s.request_stop();
  };

  auto estimate_valid = [&]() {
    if (!pipeline) return true;
    const auto e = pipeline->latest();
    return e && e->valid;
  };

  sim.post_periodic(0, config.control_period, EventPriority::ControlTick, "control",
                    [&](Simulator& s, std::int64_t) {
                      measured = state;
                      const auto policy = mailbox.latest();
                      ControlCommand u;
                      long id = -1;
                      if (policy) {
                        u = policy_torque(*policy, measured, limit);
                        id = policy->id;
                      } else {
                        u.tau = gravity_torque(chain, measured.q);
                      }
                      const double t = s.now_seconds();
                      const Pose view =
                          inverse(forward_kinematics(chain, measured.q)) * config.object.pose_at(t);
                      const ErrorSample e = view_error(t, view, desired, config.weights.rot_weight);
                      log.control.push_back({t, measured, u.tau, id, e.trans, e.rot, e.residual,
                                             estimate_valid()});
                      state = integrate_plant(plant, state, u, config.control_period);
                      if (!finite(state.q) || !finite(state.dq) || !finite(u.tau)) {
                        abort(s, "plant state diverged");
                      }
                    });

  sim.post_periodic(0, config.ocp_period, EventPriority::OcpTick, "ocp",
                    [&](Simulator& s, std::int64_t) {
                      const double t = s.now_seconds();
                      OcpProblem problem;
                      problem.model = chain;
                      problem.weights = config.weights;
                      problem.horizon = config.horizon;
                      problem.dt = config.ocp_dt;
                      problem.x0 = measured;
                      SolveRecord rec;
                      rec.time = t;
                      if (!pipeline) {
                        const Pose view = inverse(forward_kinematics(chain, measured.q)) *
                                          config.object.pose_at(t);
                        problem.reference = TrackingReference{view, measured.q, desired};
                      } else {
                        const auto est = pipeline->latest();
                        if (est && est->valid) {
                          held = TrackingReference{est->pose, q_at_frame.at(est->frame_seq),
                                                   desired};
                          held_seq = est->frame_seq;
                        } else if (held) {
                          rec.holding = true;
                        }
                        if (held) {
                          problem.reference = held;
                          rec.estimate_seq = *held_seq;
                        } else {
                          problem.weights.w_v = 0.0;
                        }
                      }
                      try {
                        const OcpSolution& sol = mpc.solve(problem);
                        if (!std::isfinite(sol.cost) || !finite(sol.tau0) ||
                            !sol.K0.allFinite()) {
                          throw SolverDiverged("non-finite OCP solution");
                        }
                        rec.policy_id = static_cast<long>(log.policies.size());
                        rec.solution = sol;
                        RiccatiPolicy policy = RiccatiPolicy::from_solution(sol, t, rec.policy_id);
                        log.policies.push_back(policy);
                        mailbox.publish(std::move(policy));
                        log.solves.push_back(std::move(rec));
                      } catch (const Error& err) {
                        abort(s, std::string("OCP solve failed: ") + err.what());
                      }
                    });

  if (pipeline) {
    sim.post_periodic(0, config.pipeline.stream_period, EventPriority::FrameArrival, "frame",
                      [&](Simulator& s, std::int64_t k) {
                        const double t = s.now_seconds();
                        TimedFrame frame;
                        frame.seq = k;
                        frame.capture_time = t;
                        frame.true_object_pose = inverse(forward_kinematics(chain, measured.q)) *
                                                 config.object.pose_at(t);
                        frame.occluded = config.object.occluded_at(t);
                        q_at_frame[k] = measured.q;
                        log.frames.push_back(frame);
                        pipeline->submit_frame(frame);
                      });
  }

  sim.run_until_seconds(config.duration);
  if (pipeline) {
    log.estimates = pipeline->estimates();
    log.events = pipeline->events();
  }
  log.trace = sim.trace();
  return log;
}

}  // namespace

// --- Scenario -----------------------------------------------------------------

Pose ObjectTrajectory::pose_at(double t) const {
  switch (kind) {
    case TrajectoryKind::Static:
      return pose;
    case TrajectoryKind::Circular: {
      const Pose spin = Pose::from_translation(center) *
                        Pose::from_axis_angle(Eigen::Vector3d::UnitZ(), angular_rate * t) *
                        Pose::from_translation(-center);
      return spin * pose;
    }
    case TrajectoryKind::Waypoints: {
      if (t <= waypoints.front().time) return waypoints.front().pose;
      if (t >= waypoints.back().time) return waypoints.back().pose;
      const auto next = std::upper_bound(
          waypoints.begin(), waypoints.end(), t,
          [](double v, const Waypoint& w) { return v < w.time; });
      const auto prev = std::prev(next);
      const double a = (t - prev->time) / (next->time - prev->time);
      return interpolate(prev->pose, next->pose, a);
    }
  }
  return pose;
}

bool ObjectTrajectory::occluded_at(double t) const {
  return std::any_of(occlusions.begin(), occlusions.end(),
                     [t](const TimeWindow& w) { return w.contains(t); });
}

void ObjectTrajectory::validate(const std::string& prefix) const {
  require(std::isfinite(angular_rate), prefix + ".angular_rate", "must be finite");
  if (kind == TrajectoryKind::Waypoints) {
    require(!waypoints.empty(), prefix + ".waypoint", "at least one waypoint is required");
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      require(waypoints[i].time > waypoints[i - 1].time,
              prefix + ".waypoint." + std::to_string(i) + ".time", "must increase strictly");
    }
  }
  for (std::size_t i = 0; i < occlusions.size(); ++i) {
    require(occlusions[i].end > occlusions[i].start,
            prefix + ".occlusion." + std::to_string(i), "end must follow start");
  }
}

ScenarioConfig ScenarioConfig::resolved() const {
  ScenarioConfig c = *this;
  const CostWeights d = CostWeights::defaults(q0);
  if (c.weights.q_rest.size() == 0) c.weights.q_rest = q0;
  if (c.weights.q_x.size() == 0) c.weights.q_x = d.q_x;
  if (c.weights.q_u.size() == 0) c.weights.q_u = d.q_u;
  c.pipeline.localizer.rng_seed = seed;
  c.pipeline.tracker.rng_seed = seed;
  return c;
}

void ScenarioConfig::validate() const {
  const int n = chain.dof();
  require(q0.size() == n, "robot.q0", "must have one entry per joint (" + std::to_string(n) + ")");
  require(finite(q0), "robot.q0", "must be finite");
  object.validate();
  pipeline.validate();
  require(std::isfinite(duration) && duration > 0.0, "scenario.duration", "must be > 0");
  require(control_period > 0.0, "scenario.control_period", "must be > 0");
  require(control_period <= ocp_period, "scenario.control_period", "must not exceed ocp_period");
  require(ocp_period <= pipeline.stream_period, "scenario.ocp_period",
          "must not exceed pipeline.stream_period");
  require(horizon > 0, "ocp.horizon", "must be positive");
  require(ocp_dt > 0.0, "ocp.dt", "must be positive");
  require(!torque_limit || *torque_limit > 0.0, "control.torque_limit", "must be > 0");
  const ScenarioConfig r = resolved();
  require(r.weights.q_x.size() == 2 * n, "weights.q_x", "must have 2 * dof entries");
  require(r.weights.q_u.size() == n, "weights.q_u", "must have dof entries");
  require(r.weights.q_rest.size() == n, "weights.q_rest", "must have dof entries");
  require(r.weights.w_v >= 0.0, "weights.w_v", "must be >= 0");
  require(r.weights.rot_weight > 0.0, "weights.rot_weight", "must be > 0");
}

ScenarioConfig default_scenario(double angular_rate) {
  ScenarioConfig c;
  c.chain = make_arm3();
  c.q0 = Eigen::Vector3d(0.0, 0.5, -0.3);
  c.weights = CostWeights::defaults(c.q0);
  c.T_ref = Pose::from_translation({0.0, 0.0, 0.5});
  c.object.pose = object_at_reference(c);
  c.object.kind = angular_rate == 0.0 ? TrajectoryKind::Static : TrajectoryKind::Circular;
  c.object.angular_rate = angular_rate;
  c.pipeline.stream_period = 1.0 / 30.0;
  c.pipeline.buffer_capacity = 16;
  c.pipeline.localizer.delay = 0.25;
  c.pipeline.localizer.trans_noise_sigma = 0.004;
  c.pipeline.localizer.rot_noise_sigma = 0.01;
  c.pipeline.tracker.delay = 0.005;
  c.pipeline.tracker.basin_trans = 0.05;
  c.pipeline.tracker.basin_rot = 0.35;
  c.pipeline.tracker.trans_noise_sigma = 0.002;
  c.pipeline.tracker.rot_noise_sigma = 0.005;
  return c;
}

Pose object_at_reference(const ScenarioConfig& config) {
  return forward_kinematics(config.chain, config.q0) * config.T_ref;
}

// --- Recall -------------------------------------------------------------------

double pose_recall(std::span<const TimedPose> estimates, std::span<const GroundTruth> truth) {
  if (truth.empty()) throw EmptySequence("pose_recall needs at least one ground-truth frame");
  std::map<std::int64_t, const TimedPose*> by_seq;
  for (const auto& e : estimates) by_seq[e.frame_seq] = &e;
  std::vector<PoseError> errors;
  errors.reserve(truth.size());
  for (const auto& g : truth) {
    const auto it = by_seq.find(g.frame_seq);
    if (it == by_seq.end() || !it->second->valid) {
      errors.push_back({std::numeric_limits<double>::infinity(),
                        std::numeric_limits<double>::infinity()});
    } else {
      errors.push_back(pose_distance(it->second->pose, g.pose));
    }
  }
  double total = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const double tau_t = 0.01 * i;
    for (int j = 1; j <= 10; ++j) {
      const double tau_r = 5.0 * j * kDeg;
      std::size_t hits = 0;
      for (const auto& e : errors) hits += e.trans < tau_t && e.rot < tau_r;
      total += static_cast<double>(hits) / static_cast<double>(errors.size());
    }
  }
  return total / 100.0;
}

const char* to_string(RecallMethod m) {
  switch (m) {
    case RecallMethod::Localizer: return "Localizer";
    case RecallMethod::TrackerInitLocalizer: return "Tracker-InitLocalizer";
    case RecallMethod::Olt: return "OLT";
    case RecallMethod::OltNoTracker: return "OLT-NoTracker";
  }
  return "?";
}

std::optional<RecallMethod> parse_recall_method(const std::string& name) {
  for (auto m : {RecallMethod::Localizer, RecallMethod::TrackerInitLocalizer, RecallMethod::Olt,
                 RecallMethod::OltNoTracker}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

double RecallCurve::at(RecallMethod method, double frequency) const {
  for (const auto& p : points) {
    if (p.method == method && p.frequency == frequency) return p.recall;
  }
  throw std::out_of_range(std::string("no recall for ") + to_string(method) + " at " +
                          std::to_string(frequency) + " Hz");
}

std::vector<TimedFrame> open_loop_frames(const ScenarioConfig& config, double frequency) {
  const Pose camera_inv = inverse(forward_kinematics(config.chain, config.q0));
  const SimTime end = to_sim_time(config.duration);
  std::vector<TimedFrame> frames;
  for (std::int64_t k = 0;; ++k) {
    const SimTime t = periodic_time(0, 1.0 / frequency, k);
    if (t >= end) break;
    const double ts = to_seconds(t);
    frames.push_back({k, ts, camera_inv * config.object.pose_at(ts), config.object.occluded_at(ts)});
  }
  return frames;
}

namespace {

PipelineConfig pipeline_at(const ScenarioConfig& config, double frequency) {
  PipelineConfig p = config.pipeline;
  p.stream_period = 1.0 / frequency;
  p.buffer_capacity = std::max(p.buffer_capacity, p.min_buffer_capacity());
  return p;
}

// Main-tracker outputs, plus localizer and corrector results for frames the
// main tracker never processed (start-up, before the first injection).
std::vector<TimedPose> per_frame_outputs(const OpenLoopRun& run) {
  std::vector<TimedPose> out = run.estimates;
  std::set<std::int64_t> covered;
  for (const auto& e : run.estimates) covered.insert(e.frame_seq);
  for (const auto& e : run.events) {
    if (!e.pose || covered.count(e.frame_seq)) continue;
    TimedPose p{*e.pose, e.frame_seq, to_seconds(e.time), PoseSource::Corrector, true};
    if (e.event == "localize_done") {
      p.source = PoseSource::Localizer;
    } else if (e.event == "correct_lost") {
      p.valid = false;
    } else if (e.event != "correct_step") {
      continue;
    }
    covered.insert(e.frame_seq);
    out.push_back(p);
  }
  return out;
}

}  // namespace

std::vector<TimedPose> run_recall_method(const ScenarioConfig& config,
                                         std::span<const TimedFrame> frames, double frequency,
                                         RecallMethod method) {
  PipelineConfig p = pipeline_at(config, frequency);
  std::vector<TimedPose> out;
  switch (method) {
    case RecallMethod::Localizer:
      for (const auto& f : frames) {
        if (auto pose = simulate_localizer(f, p.localizer)) {
          out.push_back({*pose, f.seq, f.capture_time + p.localizer.delay, PoseSource::Localizer,
                         true});
        }
      }
      return out;
    case RecallMethod::TrackerInitLocalizer: {
      std::optional<Pose> current;
      for (const auto& f : frames) {
        if (!current) {
          if (auto pose = simulate_localizer(f, p.localizer)) {
            current = *pose;
            out.push_back({*pose, f.seq, f.capture_time, PoseSource::Localizer, true});
          }
          continue;
        }
        TimedPose t = simulate_tracker(f, *current, p.tracker);
        current = t.pose;
        out.push_back(t);
      }
      return out;
    }
    case RecallMethod::Olt:
      return per_frame_outputs(run_open_loop(frames, p, PipelineMode::Olt, config.duration));
    case RecallMethod::OltNoTracker:
      p.tracker.identity = true;
      return per_frame_outputs(run_open_loop(frames, p, PipelineMode::Olt, config.duration));
  }
  return out;
}

RecallCurve run_recall_sweep(const ScenarioConfig& config, std::span<const double> frequencies,
                             std::span<const RecallMethod> methods) {
  const ScenarioConfig c = config.resolved();
  c.validate();
  RecallCurve curve;
  for (const double f : frequencies) {
    require(f > 0.0 && 1.0 / f > c.pipeline.tracker.delay, "sweep.frequency",
            "must be positive with a stream period longer than the tracker delay");
    const auto frames = open_loop_frames(c, f);
    std::vector<GroundTruth> truth;
    for (const auto& fr : frames) {
      if (!fr.occluded) truth.push_back({fr.seq, fr.true_object_pose});
    }
    for (const auto m : methods) {
      const auto est = run_recall_method(c, frames, f, m);
      curve.points.push_back({f, m, pose_recall(est, truth)});
    }
  }
  return curve;
}

// --- Step response and closed loop --------------------------------------------

Pose rotated_reference(const Pose& T_ref, const Eigen::Vector3d& axis, double rotation_deg) {
  return T_ref * Pose::from_axis_angle(axis, rotation_deg * kDeg);
}

void summarize_steady_state(ErrorTrace& trace, double fraction) {
  const auto& s = trace.samples;
  if (s.empty()) throw EmptySequence("error trace is empty");
  const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * s.size()));
  double t = 0.0, r = 0.0, v = 0.0;
  for (std::size_t i = s.size() - tail; i < s.size(); ++i) {
    t += s[i].trans;
    r += s[i].rot;
    v += s[i].residual;
  }
  trace.steady_trans = t / tail;
  trace.steady_rot = r / tail;
  trace.steady_residual = v / tail;
  trace.steady_lv = trace.w_v * s.back().residual * s.back().residual;
  const double band = 0.1 * std::abs(s.front().residual - trace.steady_residual);
  trace.settling_time = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = s.size(); i-- > 0;) {
    if (std::abs(s[i].residual - trace.steady_residual) > band) {
      if (i + 1 < s.size()) trace.settling_time = s[i + 1].time;
      return;
    }
  }
  trace.settling_time = s.front().time;
}

std::vector<ErrorTrace> step_response(const ScenarioConfig& config, double rotation_deg,
                                      std::span<const double> w_v_list,
                                      const Eigen::Vector3d& axis) {
  ScenarioConfig base = config.resolved();
  base.validate();
  base.object = ObjectTrajectory{};
  base.object.pose = object_at_reference(base);
  base.T_ref = rotated_reference(config.T_ref, axis, rotation_deg);
  std::vector<ErrorTrace> out;
  for (const double w : w_v_list) {
    require(w >= 0.0, "step.w_v", "must be >= 0");
    ScenarioConfig c = base;
    c.weights.w_v = w;
    const ClosedLoopLog log = simulate_loop(c, Feedback::Exact);
    if (log.aborted) throw SolverDiverged("step response with w_v = " + std::to_string(w) + ": " +
                                          log.abort_reason);
    ErrorTrace tr;
    tr.w_v = w;
    tr.samples.reserve(log.control.size());
    for (const auto& r : log.control) tr.samples.push_back({r.time, r.trans, r.rot, r.residual});
    summarize_steady_state(tr);
    out.push_back(std::move(tr));
  }
  return out;
}

double ClosedLoopLog::median_residual(double from_time) const {
  std::vector<double> v;
  for (const auto& r : control) {
    if (r.time >= from_time) v.push_back(r.residual);
  }
  return median(std::move(v));
}

double ClosedLoopLog::median_trans(double from_time) const {
  std::vector<double> v;
  for (const auto& r : control) {
    if (r.time >= from_time) v.push_back(r.trans);
  }
  return median(std::move(v));
}

ClosedLoopLog run_closed_loop(const ScenarioConfig& config, PipelineMode mode) {
  const ScenarioConfig c = config.resolved();
  c.validate();
  return simulate_loop(c, mode == PipelineMode::Olt ? Feedback::Olt : Feedback::LocalizerOnly);
}

double torque_replay_error(const ClosedLoopLog& log, const ScenarioConfig& config) {
  const TorqueLimit limit{config.torque_limit};
  double worst = 0.0;
  for (const auto& r : log.control) {
    const Eigen::VectorXd expected =
        r.policy_id < 0 ? gravity_torque(config.chain, r.x.q)
                        : policy_torque(log.policies.at(static_cast<std::size_t>(r.policy_id)), r.x,
                                        limit)
                              .tau;
    worst = std::max(worst, (expected - r.tau).cwiseAbs().maxCoeff());
  }
  return worst;
}

// --- Bench --------------------------------------------------------------------

BenchResult run_bench(const ScenarioConfig& config, bool wallclock_demo, double demo_seconds) {
  const ScenarioConfig c = config.resolved();
  c.validate();
  BenchResult out;

  OcpProblem problem;
  problem.model = c.chain;
  problem.weights = c.weights;
  problem.horizon = c.horizon;
  problem.dt = c.ocp_dt;
  problem.x0 = RobotState::at_rest(c.q0);
  const Pose view = inverse(forward_kinematics(c.chain, c.q0)) * c.object.pose_at(0.0);
  problem.reference =
      TrackingReference{view, c.q0, rotated_reference(c.T_ref, Eigen::Vector3d::UnitY(), 10.0)};
  MpcSolver mpc(c.solver);
  double total = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const OcpSolution& sol = mpc.solve(problem);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    total += dt;
    out.ocp_solve_max = std::max(out.ocp_solve_max, dt);
    ++out.solves;
    problem.x0 = RobotState::from_vector(sol.xs[1]);
  }
  out.ocp_solve_mean = total / out.solves;

  const RiccatiPolicy policy = RiccatiPolicy::from_solution(*mpc.last(), 0.0);
  const RobotState x = RobotState::from_vector(mpc.last()->xs[1]);
  constexpr int calls = 100000;
  double sink = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < calls; ++i) sink += policy_torque(policy, x).tau[0];
  out.policy_eval_mean =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / calls;
  if (!std::isfinite(sink)) throw SolverDiverged("policy evaluation produced a non-finite torque");

  if (wallclock_demo) {
    ThreadedPipeline pipeline(c.pipeline);
    const Pose camera_inv = inverse(forward_kinematics(c.chain, c.q0));
    const auto start = std::chrono::steady_clock::now();
    const auto period = std::chrono::duration<double>(c.pipeline.stream_period);
    for (std::int64_t k = 0;; ++k) {
      const auto due = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   period * static_cast<double>(k));
      if (std::chrono::duration<double>(due - start).count() >= demo_seconds) break;
      std::this_thread::sleep_until(due);
      const double t = pipeline.elapsed();
      if (auto e = pipeline.latest()) {
        out.wallclock_max_age = std::max(out.wallclock_max_age, t - e->produced_time);
      }
      pipeline.submit_frame({k, t, camera_inv * c.object.pose_at(t), c.object.occluded_at(t)});
      ++out.wallclock_frames;
    }
    pipeline.stop();
    out.wallclock_estimates = pipeline.estimates().size();
  }
  return out;
}

}  // namespace olt
