// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lqr_oracle.hpp"
#include "olt/experiments.hpp"
#include "olt/geometry.hpp"
#include "olt/ocp.hpp"
#include "olt/perception.hpp"
#include "olt/robot.hpp"
#include "olt/servo.hpp"
#include "pipeline_audit.hpp"
#include "replay_oracle.hpp"
#include "scenarios.hpp"
#include "test_util.hpp"

using namespace olt;
using namespace olt::test;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double max_abs(const Pose& a, const Pose& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

// --- 1 -----------------------------------------------------------------------

Outcome lie_group() {
  Outcome o;
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Twist xi = random_twist(rng, 3.0, 3.0);
    worst = std::max(worst, (log(exp(xi)).vector() - xi.vector()).cwiseAbs().maxCoeff());
  }
  o.require(worst < 1e-9, "exp/log round trip " + fmt("%.2e", worst));
  o.note("round trip " + fmt("%.2e", worst));

  double geo = 0.0, ends = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng, 1.0);
    const Pose b = a * exp(random_twist(rng, 1.0, 2.5));
    const double alpha = std::uniform_real_distribution<>(0.0, 1.0)(rng);
    ends = std::max({ends, max_abs(interpolate(a, b, 0.0), a), max_abs(interpolate(a, b, 1.0), b)});
    // Geodesic: the relative motion to the interpolant is alpha times the full log.
    const Vector6d full = log(inverse(a) * b).vector();
    const Vector6d part = log(inverse(a) * interpolate(a, b, alpha)).vector();
    geo = std::max(geo, (part - alpha * full).cwiseAbs().maxCoeff());
  }
  o.require(ends < 1e-12 && geo < 1e-9, "interpolation " + fmt("%.2e", std::max(ends, geo)));

  double ident = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng, 2.0), b = random_pose(rng, 2.0), c = random_pose(rng, 2.0);
    ident = std::max({ident, max_abs(compose(a, inverse(a)), Pose::identity()),
                      max_abs(compose(compose(a, b), c), compose(a, compose(b, c))),
                      max_abs(inverse(compose(a, b)), compose(inverse(b), inverse(a))),
                      (compose(a, b).matrix() - a.matrix() * b.matrix()).cwiseAbs().maxCoeff()});
  }
  o.require(ident < 1e-9, "compose/inverse identities " + fmt("%.2e", ident));
  return o;
}

// --- 2 -----------------------------------------------------------------------

Outcome dynamics() {
  Outcome o;
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + trial % 7;
    const KinematicChain chain = random_chain(rng, n);
    const Eigen::VectorXd q = random_vector(rng, n, 3.0);
    const Eigen::VectorXd dq = random_vector(rng, n, 2.0);
    const Eigen::VectorXd ddq = random_vector(rng, n, 2.0);
    worst = std::max(worst, (aba(chain, q, dq, rnea(chain, q, dq, ddq)) - ddq).cwiseAbs().maxCoeff());
  }
  o.require(worst < 1e-8, "aba(rnea) " + fmt("%.2e", worst));
  o.note("aba(rnea) " + fmt("%.2e", worst));

  const double m = 1.7, lc = 0.42, g = 9.81;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  const double hold = rnea(make_pendulum(m, lc, g), zero, zero, zero)[0];
  o.require(std::abs(hold - m * g * lc) < 1e-10, "pendulum torque " + fmt("%.3e", hold - m * g * lc));

  const KinematicChain p = make_pendulum(1.0, 0.5, g);
  const PlantModel model = p;
  const double inertia = p.links()[0].inertia(0, 0) + 1.0 * 0.5 * 0.5;
  const auto energy = [&](const RobotState& s) {
    return 0.5 * inertia * s.dq[0] * s.dq[0] + 1.0 * g * 0.5 * std::sin(s.q[0]);
  };
  RobotState s = RobotState::at_rest(zero);
  const double e0 = energy(s);
  double drift = 0.0;
  for (int i = 0; i < 1000; ++i) {
    s = integrate_plant(model, s, {zero}, 1e-3);
    drift = std::max(drift, std::abs(energy(s) - e0));
  }
  // Relative to the energy scale m g l_c (the drop swings through the full potential range).
  const double rel = drift / (1.0 * g * 0.5);
  o.require(rel < 0.01, "energy drift " + fmt("%.3f%%", 100 * rel));
  o.note("energy drift " + fmt("%.3f%%", 100 * rel));
  return o;
}

// --- 3 -----------------------------------------------------------------------

Outcome solver_oracle() {
  Outcome o;
  OcpProblem p;
  const Eigen::Vector2d mass(2.0, 0.5);
  p.model = DoubleIntegrator{mass};
  p.weights = CostWeights::defaults(Eigen::Vector2d(0.2, -0.1));
  p.weights.w_v = 0.0;
  p.horizon = 20;
  p.x0 = RobotState(Eigen::Vector2d(1.0, -0.5), Eigen::Vector2d(0.3, 0.7));
  const OcpSolution s = solve_ocp(p);
  Eigen::VectorXd e0 = p.x0.vector();
  e0.head(2) -= p.weights.q_rest;
  const LqrOracle oracle = lqr_oracle(mass, p.dt, p.horizon, p.weights.q_x, p.weights.q_u, e0);
  double worst = 0.0;
  for (int i = 0; i < p.horizon; ++i) {
    worst = std::max({worst, (s.us[i] - oracle.us[i]).cwiseAbs().maxCoeff(),
                      (s.gains[i] - oracle.gains[i]).cwiseAbs().maxCoeff()});
  }
  o.require(worst < 1e-6, "LQR gains/controls " + fmt("%.2e", worst));
  o.require(s.iterations <= 2, "iterations " + std::to_string(s.iterations));
  o.note("LQR " + fmt("%.2e", worst) + " in " + std::to_string(s.iterations) + " it");

  const KinematicChain arm = make_arm3();
  const Eigen::VectorXd q0 = Eigen::Vector3d(0.3, -0.8, 0.2);
  const TrackingReference ref{Pose::from_translation({0, 0, 0.5}), q0,
                              exp(Twist({0.05, -0.03, 0.02}, {0.0, 0.1, -0.05})) *
                                  Pose::from_translation({0, 0, 0.5})};
  OcpProblem t;
  t.model = arm;
  t.weights = CostWeights::defaults(q0);
  t.weights.w_v = 1.0;
  t.weights.q_x.setZero();
  t.weights.q_u.setZero();
  t.reference = ref;
  std::mt19937_64 rng(303);
  double rel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd q = q0 + random_vector(rng, 3, 0.6);
    const Eigen::VectorXd grad =
        cost_derivatives(t, RobotState::at_rest(q), Eigen::Vector3d::Zero()).lx.head(3);
    Eigen::Vector3d fd;
    for (int i = 0; i < 3; ++i) {
      Eigen::VectorXd a = q, b = q;
      a[i] += 1e-4;
      b[i] -= 1e-4;
      fd[i] = (tracking_cost(arm, a, ref, 1.0) - tracking_cost(arm, b, ref, 1.0)) / 2e-4;
    }
    rel = std::max(rel, (grad - fd).norm() / std::max(fd.norm(), 1e-12));
  }
  o.require(rel < 1e-3, "l_v gradient rel. error " + fmt("%.2e", rel));
  o.note("l_v gradient " + fmt("%.2e", rel));
  return o;
}

// --- 4 -----------------------------------------------------------------------

Outcome riccati_policy() {
  Outcome o;
  std::mt19937_64 rng(404);
  RiccatiPolicy p;
  p.tau0 = random_vector(rng, 3, 5.0);
  p.K0.resize(3, 6);
  for (int c = 0; c < 6; ++c) p.K0.col(c) = random_vector(rng, 3, 10.0);
  p.x_lin = RobotState(random_vector(rng, 3, 2.0), random_vector(rng, 3, 1.0));
  o.require(policy_torque(p, p.x_lin).tau == p.tau0, "tau(x_lin) != tau0");
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd d = random_vector(rng, 6, 1.0);
    const Eigen::VectorXd inc =
        policy_torque(p, RobotState::from_vector(p.x_lin.vector() + d)).tau - p.tau0;
    worst = std::max(worst, (inc - p.K0 * d).cwiseAbs().maxCoeff());
  }
  o.require(worst < 1e-12, "affine increment " + fmt("%.2e", worst));
  o.note("tau(x_lin) exact, affine increment " + fmt("%.1e", worst));
  return o;
}

// --- 5 -----------------------------------------------------------------------

Outcome catch_up_oracle() {
  Outcome o;
  PipelineConfig cfg;
  cfg.stream_period = 1.0 / 30.0;
  cfg.localizer.delay = 0.25;
  cfg.tracker.delay = 0.005;
  cfg.buffer_capacity = cfg.min_buffer_capacity();
  cfg.localizer.detect_prob = 0.9;
  cfg.localizer.trans_noise_sigma = 0.005;
  cfg.localizer.rot_noise_sigma = 0.02;
  cfg.localizer.rng_seed = 5;
  cfg.tracker.alpha = 0.8;
  cfg.tracker.trans_noise_sigma = 0.003;
  cfg.tracker.rot_noise_sigma = 0.01;
  cfg.tracker.rng_seed = 6;
  std::vector<TimedFrame> frames;
  for (std::int64_t k = 0;; ++k) {
    const SimTime t = periodic_time(0, cfg.stream_period, k);
    if (t >= to_sim_time(10.0)) break;
    const double ts = to_seconds(t);
    const Pose pose{Eigen::Quaterniond(Eigen::AngleAxisd(ts, Eigen::Vector3d::UnitZ())),
                    Eigen::Vector3d(0.1 * std::cos(ts), 0.1 * std::sin(ts), 0.5)};
    frames.push_back({k, ts, pose, (ts > 3.0 && ts < 4.0) || (ts > 7.0 && ts < 7.5)});
  }
  const OpenLoopRun run = run_open_loop(frames, cfg, PipelineMode::Olt, 10.0);
  const ReplayResult oracle = sequential_replay(frames, cfg, 10.0);
  const std::string a = serialize(run.estimates), b = serialize(oracle.estimates);
  o.require(a == b, "estimate streams differ");
  o.require(serialize(run.corrector_results) == serialize(oracle.corrector_results),
            "corrector results differ");
  o.require(run.estimates.size() > frames.size() / 2, "too few estimates");
  o.note(std::to_string(run.estimates.size()) + " estimates, " + std::to_string(a.size()) +
         " bytes identical");
  return o;
}

// --- 6 -----------------------------------------------------------------------

Outcome fig4() {
  Outcome o;
  const ScenarioConfig c = fig4_scenario(0);
  const std::vector<double> freqs{10, 30, 60, 90, 120};
  const std::vector<RecallMethod> methods{RecallMethod::Localizer, RecallMethod::TrackerInitLocalizer,
                                          RecallMethod::Olt, RecallMethod::OltNoTracker};
  const RecallCurve curve = run_recall_sweep(c, freqs, methods);
  std::string olt_list;
  double prev = 2.0;
  for (const double f : freqs) {
    const double loc = curve.at(RecallMethod::Localizer, f);
    const double olt = curve.at(RecallMethod::Olt, f);
    const double til = curve.at(RecallMethod::TrackerInitLocalizer, f);
    const double none = curve.at(RecallMethod::OltNoTracker, f);
    const std::string at = " at " + fmt("%.0f", f) + " Hz";
    o.require(loc >= olt, "Localizer >= OLT" + at);
    o.require(olt >= til, "OLT >= Tracker-InitLocalizer" + at);
    if (f >= 60) o.require(olt >= none, "OLT >= OLT-NoTracker" + at);
    o.require(olt <= prev + 0.02, "OLT non-increasing" + at);
    prev = olt;
    olt_list += (olt_list.empty() ? "" : "/") + fmt("%.3f", olt);
  }
  o.note("OLT recall " + olt_list + ", Localizer " +
         fmt("%.3f", curve.at(RecallMethod::Localizer, 30)) + ", Tracker-InitLocalizer " +
         fmt("%.3f", curve.at(RecallMethod::TrackerInitLocalizer, 30)));
  return o;
}

// --- 7 -----------------------------------------------------------------------

Outcome fig5() {
  Outcome o;
  const ScenarioConfig c = step_scenario();
  const CostWeights w = c.resolved().weights;
  o.require(w.q_x.head(3).isApproxToConstant(0.3) && w.q_x.tail(3).isApproxToConstant(3.0) &&
                w.q_u.isApproxToConstant(0.1),
            "weights are not Q_x = diag(0.3, 3), Q_u = diag(0.1)");
  const std::vector<double> ws{10, 20, 40};
  const auto traces = step_response(c, 30.0, ws);
  for (std::size_t i = 1; i < traces.size(); ++i) {
    o.require(traces[i].steady_residual < traces[i - 1].steady_residual,
              "steady-state error not decreasing at w_v=" + fmt("%.0f", traces[i].w_v));
  }
  const double settle = traces[1].settling_time;
  o.require(std::isfinite(settle) && settle <= 2.0, "w_v=20 settling " + fmt("%.3f s", settle));
  o.note("steady error " + fmt("%.4f", traces[0].steady_residual) + " > " +
         fmt("%.4f", traces[1].steady_residual) + " > " + fmt("%.4f", traces[2].steady_residual) +
         ", w_v=20 settles in " + fmt("%.3f s", settle));
  return o;
}

// --- 8 -----------------------------------------------------------------------

Outcome closed_loop_invariants() {
  Outcome o;
  for (const double rate : {30.0, 120.0}) {
    const ScenarioConfig c = occlusion_scenario(rate);
    const std::string at = " at " + fmt("%.0f", rate) + " Hz";
    const ClosedLoopLog a = run_closed_loop(c);
    o.require(!a.aborted, "run aborted" + at + ": " + a.abort_reason);
    const PipelineConfig& p = c.pipeline;
    const Audit fresh = audit_freshness(a.events, p);
    const Audit live = audit_liveness(a.events, p);
    const double bound = recovery_bound(p);
    const Audit rec = audit_recovery(a.events, p, bound);
    o.require(fresh.ok() && fresh.checked > 0, "freshness" + at);
    o.require(live.ok() && live.checked > 0, "liveness" + at);
    o.require(rec.ok() && rec.checked == 1, "recovery" + at);
    const ClosedLoopLog b = run_closed_loop(c);
    std::ostringstream ea, eb;
    write_event_log(ea, a.events);
    write_event_log(eb, b.events);
    o.require(ea.str() == eb.str(), "event log not deterministic" + at);

    // Faster object: it leaves the basin while hidden and only the localizer can recover.
    const ScenarioConfig jump = occlusion_scenario(rate, 7, 0.05);
    const ClosedLoopLog j = run_closed_loop(jump);
    o.require(!j.aborted, "jump run aborted" + at);
    const double worst = localizer_path_bound(jump.pipeline);
    const Audit jrec = audit_recovery(j.events, jump.pipeline, worst);
    o.require(jrec.ok() && jrec.checked == 1, "localizer-path recovery" + at);
    o.require(audit_freshness(j.events, jump.pipeline).ok() &&
                  audit_liveness(j.events, jump.pipeline).ok(),
              "freshness/liveness with re-localization" + at);
    o.note(fmt("%.0f Hz: ", rate) + std::to_string(fresh.checked) + " outputs fresh, " +
           std::to_string(live.checked) + " catch-ups, re-acquire " + fmt("%.3f", rec.worst) +
           " s <= " + fmt("%.3f", bound) + " s, re-localize " + fmt("%.3f", jrec.worst) +
           " s <= " + fmt("%.3f", worst) + " s");
  }
  return o;
}

// --- 9 -----------------------------------------------------------------------

Outcome closed_loop_comparison() {
  Outcome o;
  for (const std::uint64_t seed : {1u, 2u, 3u}) {
    const ScenarioConfig c = circling_scenario(seed);
    const ClosedLoopLog olt = run_closed_loop(c, PipelineMode::Olt);
    const ClosedLoopLog loc = run_closed_loop(c, PipelineMode::LocalizerOnly);
    o.require(!olt.aborted && !loc.aborted, "aborted run at seed " + std::to_string(seed));
    if (olt.control.empty() || loc.control.empty()) continue;
    const double a = olt.median_trans(), b = loc.median_trans();
    o.require(a < b, "seed " + std::to_string(seed) + " OLT " + fmt("%.4f", a) +
                         " >= Localizer-only " + fmt("%.4f", b));
    o.note("seed " + std::to_string(seed) + ": " + fmt("%.4f", a) + " < " + fmt("%.4f m", b));
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "Lie-group suite", 1.0, lie_group},
      {2, "dynamics suite", 10.0, dynamics},
      {3, "solver oracle", 10.0, solver_oracle},
      {4, "Riccati policy", 1.0, riccati_policy},
      {5, "catch-up oracle", 5.0, catch_up_oracle},
      {6, "recall vs stream frequency", 120.0, fig4},
      {7, "step response", 120.0, fig5},
      {8, "closed-loop pipeline invariants", 60.0, closed_loop_invariants},
      {9, "closed-loop OLT vs localizer-only", 180.0, closed_loop_comparison},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.ok = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (dt > c.budget_s) {
      out.ok = false;
      out.detail += "; over runtime budget";
    }
    failed += !out.ok;
    std::printf("%s %d %s: %s (%.2f s, budget %.0f s)\n", out.ok ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), dt, c.budget_s);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
