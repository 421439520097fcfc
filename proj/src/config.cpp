#include "olt/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>

#include "olt/errors.hpp"

namespace olt {

namespace {

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string num(std::uint64_t v) { return std::to_string(v); }

int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

const char* kind_name(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::Static: return "static";
    case TrajectoryKind::Circular: return "circular";
    case TrajectoryKind::Waypoints: return "waypoints";
  }
  return "?";
}

// A YAML mapping at a dotted path; remembers which keys were read so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(YAML::Node node, std::string path, int line)
      : node_(std::move(node)), path_(std::move(path)), line_(line) {
    if (present() && !node_.IsMap()) throw ParseError(line_of(node_), path_, "expected a mapping");
  }

  // An empty value ("key:" with nothing after it) counts as absent.
  bool present() const { return node_ && !node_.IsNull(); }
  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const {
    if (!present()) return false;
    const YAML::Node n = node_[key];
    return n && !n.IsNull();
  }

  YAML::Node get(const std::string& key, bool required) {
    used_.insert(key);
    YAML::Node n = has(key) ? node_[key] : YAML::Node(YAML::NodeType::Undefined);
    if (!n && required) throw ValidationError(field(key), "is required");
    return n;
  }

  Section section(const std::string& key) {
    YAML::Node n = get(key, false);
    return Section(n, field(key), n ? line_of(n) : line_);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const YAML::Node n = get(key, !fallback);
    if (!n) return *fallback;
    return as_number(n, field(key));
  }

  long integer(const std::string& key, long fallback) {
    const YAML::Node n = get(key, false);
    if (!n) return fallback;
    try {
      return n.as<long>();
    } catch (const YAML::Exception&) {
      throw ParseError(line_of(n), field(key), "expected an integer");
    }
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    const YAML::Node n = get(key, false);
    if (!n) return fallback;
    try {
      return n.as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      throw ParseError(line_of(n), field(key), "expected a non-negative integer");
    }
  }

  bool boolean(const std::string& key, bool fallback) {
    const YAML::Node n = get(key, false);
    if (!n) return fallback;
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      throw ParseError(line_of(n), field(key), "expected true or false");
    }
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const YAML::Node n = get(key, !fallback);
    if (!n) return *fallback;
    if (!n.IsScalar()) throw ParseError(line_of(n), field(key), "expected a scalar");
    return n.Scalar();
  }

  std::optional<Eigen::VectorXd> vector(const std::string& key, bool required, int size = -1) {
    const YAML::Node n = get(key, required);
    if (!n) return std::nullopt;
    return as_vector(n, field(key), size);
  }

  Pose pose(const std::string& key, std::optional<Pose> fallback = std::nullopt) {
    const YAML::Node n = get(key, !fallback);
    if (!n) return *fallback;
    return as_pose(n, field(key));
  }

  const YAML::Node& node() const { return node_; }

  void finish() const {
    if (!present()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.Scalar();
      if (!used_.count(key)) throw ParseError(line_of(kv.first), field(key), "unknown field");
    }
  }

  static double as_number(const YAML::Node& n, const std::string& field) {
    if (!n.IsScalar()) throw ParseError(line_of(n), field, "expected a number");
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      throw ParseError(line_of(n), field, "expected a number, got '" + n.Scalar() + "'");
    }
  }

  static Eigen::VectorXd as_vector(const YAML::Node& n, const std::string& field, int size) {
    if (!n.IsSequence()) throw ParseError(line_of(n), field, "expected a list of numbers");
    if (size >= 0 && static_cast<int>(n.size()) != size) {
      throw ParseError(line_of(n), field,
                       "expected " + std::to_string(size) + " numbers, got " +
                           std::to_string(n.size()));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = as_number(n[i], field + "[" + std::to_string(i) + "]");
    }
    return v;
  }

  // [tx, ty, tz, qx, qy, qz, qw]; a quaternion that is already unit is kept bit-exact.
  static Pose as_pose(const YAML::Node& n, const std::string& field) {
    const Eigen::VectorXd v = as_vector(n, field, 7);
    const Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
    const double norm = q.norm();
    if (!(norm > 1e-9)) throw ParseError(line_of(n), field, "quaternion has zero norm");
    Pose p(q, v.head<3>());
    if (std::abs(norm - 1.0) < 1e-14) p.rotation = q;
    return p;
  }

 private:
  YAML::Node node_;
  std::string path_;
  int line_;
  std::set<std::string> used_;
};

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// --- emitting -------------------------------------------------------------------

void emit_list(YAML::Emitter& e, std::span<const double> values) {
  e << YAML::Flow << YAML::BeginSeq;
  for (const double v : values) e << num(v);
  e << YAML::EndSeq;
}

void emit_vector(YAML::Emitter& e, const Eigen::VectorXd& v) {
  emit_list(e, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

void emit_pose(YAML::Emitter& e, const Pose& p) {
  const double v[7] = {p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.x(),
                       p.rotation.y(),    p.rotation.z(),    p.rotation.w()};
  emit_list(e, v);
}

template <typename T>
void kv(YAML::Emitter& e, const char* key, const T& value) {
  e << YAML::Key << key << YAML::Value << value;
}

void kv_num(YAML::Emitter& e, const char* key, double value) { kv(e, key, num(value)); }

}  // namespace

void RunConfig::validate() const {
  scenario.validate();
  if (!(step.axis.norm() > 0.0)) throw ValidationError("step.axis", "must be non-zero");
  if (!std::isfinite(step.rotation_deg)) throw ValidationError("step.rotation_deg", "must be finite");
  if (step.w_v.empty()) throw ValidationError("step.w_v", "needs at least one weight");
  for (const double w : step.w_v) {
    if (!(w >= 0.0)) throw ValidationError("step.w_v", "weights must be >= 0");
  }
  if (sweep.frequencies.empty()) throw ValidationError("sweep.frequencies", "needs at least one rate");
  for (const double f : sweep.frequencies) {
    if (!(f > 0.0) || !(1.0 / f > scenario.pipeline.tracker.delay)) {
      throw ValidationError("sweep.frequencies",
                            "every stream period must exceed pipeline.tracker.delay (" +
                                num(f) + " Hz does not)");
    }
  }
  if (sweep.methods.empty()) throw ValidationError("sweep.methods", "needs at least one method");
  if (!(bench.demo_seconds > 0.0)) throw ValidationError("bench.demo_seconds", "must be > 0");
}

RunConfig parse_config_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.mark.line + 1, "<document>", e.msg);
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  Section top(root, "", 1);

  RunConfig rc;
  ScenarioConfig& c = rc.scenario;

  Section scenario = top.section("scenario");
  c.duration = scenario.number("duration");
  c.seed = scenario.unsigned_integer("seed", 0);
  c.ocp_period = scenario.number("ocp_period", 0.01);
  c.control_period = scenario.number("control_period", 0.001);
  scenario.finish();

  Section robot = top.section("robot");
  const std::string chain = robot.text("chain", std::string("arm3"));
  if (chain != "arm3") throw ValidationError("robot.chain", "only 'arm3' is available");
  c.chain = make_arm3();
  c.q0 = *robot.vector("q0", true);
  if (robot.has("torque_limit")) c.torque_limit = robot.number("torque_limit");
  robot.finish();

  Section reference = top.section("reference");
  c.T_ref = reference.pose("pose");
  reference.finish();

  Section object = top.section("object");
  const std::string kind = object.text("kind");
  if (kind == "static") {
    c.object.kind = TrajectoryKind::Static;
  } else if (kind == "circular") {
    c.object.kind = TrajectoryKind::Circular;
  } else if (kind == "waypoints") {
    c.object.kind = TrajectoryKind::Waypoints;
  } else {
    throw ValidationError("object.kind", "must be static, circular or waypoints");
  }
  if (c.object.kind != TrajectoryKind::Waypoints) c.object.pose = object.pose("pose");
  if (c.object.kind == TrajectoryKind::Circular) {
    c.object.center = *object.vector("center", true, 3);
    c.object.angular_rate = object.number("angular_rate");
  }
  if (c.object.kind == TrajectoryKind::Waypoints) {
    const YAML::Node wps = object.get("waypoints", true);
    if (!wps.IsSequence()) throw ParseError(line_of(wps), "object.waypoints", "expected a list");
    for (std::size_t i = 0; i < wps.size(); ++i) {
      Section w(wps[i], "object.waypoints." + std::to_string(i), line_of(wps[i]));
      c.object.waypoints.push_back({w.number("time"), w.pose("pose")});
      w.finish();
    }
  }
  if (const YAML::Node occ = object.get("occlusions", false)) {
    if (!occ.IsSequence()) throw ParseError(line_of(occ), "object.occlusions", "expected a list");
    for (std::size_t i = 0; i < occ.size(); ++i) {
      const Eigen::VectorXd w =
          Section::as_vector(occ[i], "object.occlusions[" + std::to_string(i) + "]", 2);
      c.object.occlusions.push_back({w[0], w[1]});
    }
  }
  object.finish();

  Section pipeline = top.section("pipeline");
  c.pipeline.stream_period = pipeline.number("stream_period");
  c.pipeline.buffer_capacity =
      static_cast<int>(pipeline.integer("buffer_capacity", c.pipeline.buffer_capacity));
  Section loc = pipeline.section("localizer");
  c.pipeline.localizer.delay = loc.number("delay");
  c.pipeline.localizer.detect_prob = loc.number("detect_prob", 1.0);
  c.pipeline.localizer.trans_noise_sigma = loc.number("trans_noise_sigma", 0.0);
  c.pipeline.localizer.rot_noise_sigma = loc.number("rot_noise_sigma", 0.0);
  loc.finish();
  Section trk = pipeline.section("tracker");
  const TrackerModel td;
  c.pipeline.tracker.delay = trk.number("delay");
  c.pipeline.tracker.basin_trans = trk.number("basin_trans", td.basin_trans);
  c.pipeline.tracker.basin_rot = trk.number("basin_rot", td.basin_rot);
  c.pipeline.tracker.alpha = trk.number("alpha", td.alpha);
  c.pipeline.tracker.trans_noise_sigma = trk.number("trans_noise_sigma", 0.0);
  c.pipeline.tracker.rot_noise_sigma = trk.number("rot_noise_sigma", 0.0);
  c.pipeline.tracker.identity = trk.boolean("identity", false);
  trk.finish();
  pipeline.finish();

  Section weights = top.section("weights");
  const CostWeights wd = CostWeights::defaults(c.q0);
  c.weights.w_v = weights.number("w_v", wd.w_v);
  c.weights.rot_weight = weights.number("rot_weight", wd.rot_weight);
  c.weights.q_x = weights.vector("q_x", false).value_or(wd.q_x);
  c.weights.q_u = weights.vector("q_u", false).value_or(wd.q_u);
  c.weights.q_rest = weights.vector("q_rest", false).value_or(c.q0);
  weights.finish();

  Section ocp = top.section("ocp");
  const SolverOptions so;
  c.horizon = static_cast<int>(ocp.integer("horizon", c.horizon));
  c.ocp_dt = ocp.number("dt", c.ocp_dt);
  c.solver.max_iterations = static_cast<int>(ocp.integer("max_iterations", so.max_iterations));
  c.solver.gradient_tolerance = ocp.number("gradient_tolerance", so.gradient_tolerance);
  c.solver.cost_tolerance = ocp.number("cost_tolerance", so.cost_tolerance);
  c.solver.warm_start_shift = static_cast<int>(ocp.integer("warm_start_shift", so.warm_start_shift));
  ocp.finish();

  Section step = top.section("step");
  rc.step.rotation_deg = step.number("rotation_deg", rc.step.rotation_deg);
  rc.step.axis = step.vector("axis", false, 3).value_or(Eigen::VectorXd(rc.step.axis));
  if (const auto w = step.vector("w_v", false)) rc.step.w_v = to_std(*w);
  step.finish();

  Section sweep = top.section("sweep");
  if (const auto f = sweep.vector("frequencies", false)) rc.sweep.frequencies = to_std(*f);
  if (const YAML::Node m = sweep.get("methods", false)) {
    if (!m.IsSequence()) throw ParseError(line_of(m), "sweep.methods", "expected a list");
    rc.sweep.methods.clear();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto method = parse_recall_method(m[i].IsScalar() ? m[i].Scalar() : "");
      if (!method) {
        throw ParseError(line_of(m[i]), "sweep.methods",
                         "unknown method (Localizer, Tracker-InitLocalizer, OLT, OLT-NoTracker)");
      }
      rc.sweep.methods.push_back(*method);
    }
  }
  sweep.finish();

  Section bench = top.section("bench");
  rc.bench.demo_seconds = bench.number("demo_seconds", rc.bench.demo_seconds);
  bench.finish();

  top.finish();
  rc.validate();
  return rc;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot read '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

std::string serialize_config(const RunConfig& rc) {
  const ScenarioConfig& c = rc.scenario;
  YAML::Emitter e;
  e << YAML::BeginMap;

  e << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
  kv_num(e, "duration", c.duration);
  kv(e, "seed", num(c.seed));
  kv_num(e, "ocp_period", c.ocp_period);
  kv_num(e, "control_period", c.control_period);
  e << YAML::EndMap;

  e << YAML::Key << "robot" << YAML::Value << YAML::BeginMap;
  kv(e, "chain", "arm3");
  e << YAML::Key << "q0" << YAML::Value;
  emit_vector(e, c.q0);
  if (c.torque_limit) kv_num(e, "torque_limit", *c.torque_limit);
  e << YAML::EndMap;

  e << YAML::Key << "reference" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "pose" << YAML::Value;
  emit_pose(e, c.T_ref);
  e << YAML::EndMap;

  e << YAML::Key << "object" << YAML::Value << YAML::BeginMap;
  kv(e, "kind", kind_name(c.object.kind));
  if (c.object.kind != TrajectoryKind::Waypoints) {
    e << YAML::Key << "pose" << YAML::Value;
    emit_pose(e, c.object.pose);
  }
  if (c.object.kind == TrajectoryKind::Circular) {
    e << YAML::Key << "center" << YAML::Value;
    emit_vector(e, c.object.center);
    kv_num(e, "angular_rate", c.object.angular_rate);
  }
  if (c.object.kind == TrajectoryKind::Waypoints) {
    e << YAML::Key << "waypoints" << YAML::Value << YAML::BeginSeq;
    for (const auto& w : c.object.waypoints) {
      e << YAML::BeginMap;
      kv_num(e, "time", w.time);
      e << YAML::Key << "pose" << YAML::Value;
      emit_pose(e, w.pose);
      e << YAML::EndMap;
    }
    e << YAML::EndSeq;
  }
  if (!c.object.occlusions.empty()) {
    e << YAML::Key << "occlusions" << YAML::Value << YAML::BeginSeq;
    for (const auto& w : c.object.occlusions) {
      const double v[2] = {w.start, w.end};
      emit_list(e, v);
    }
    e << YAML::EndSeq;
  }
  e << YAML::EndMap;

  const PipelineConfig& p = c.pipeline;
  e << YAML::Key << "pipeline" << YAML::Value << YAML::BeginMap;
  kv_num(e, "stream_period", p.stream_period);
  kv(e, "buffer_capacity", std::to_string(p.buffer_capacity));
  e << YAML::Key << "localizer" << YAML::Value << YAML::BeginMap;
  kv_num(e, "delay", p.localizer.delay);
  kv_num(e, "detect_prob", p.localizer.detect_prob);
  kv_num(e, "trans_noise_sigma", p.localizer.trans_noise_sigma);
  kv_num(e, "rot_noise_sigma", p.localizer.rot_noise_sigma);
  e << YAML::EndMap;
  e << YAML::Key << "tracker" << YAML::Value << YAML::BeginMap;
  kv_num(e, "delay", p.tracker.delay);
  kv_num(e, "basin_trans", p.tracker.basin_trans);
  kv_num(e, "basin_rot", p.tracker.basin_rot);
  kv_num(e, "alpha", p.tracker.alpha);
  kv_num(e, "trans_noise_sigma", p.tracker.trans_noise_sigma);
  kv_num(e, "rot_noise_sigma", p.tracker.rot_noise_sigma);
  kv(e, "identity", p.tracker.identity ? "true" : "false");
  e << YAML::EndMap;
  e << YAML::EndMap;

  const ScenarioConfig r = c.resolved();
  e << YAML::Key << "weights" << YAML::Value << YAML::BeginMap;
  kv_num(e, "w_v", r.weights.w_v);
  kv_num(e, "rot_weight", r.weights.rot_weight);
  e << YAML::Key << "q_x" << YAML::Value;
  emit_vector(e, r.weights.q_x);
  e << YAML::Key << "q_u" << YAML::Value;
  emit_vector(e, r.weights.q_u);
  e << YAML::Key << "q_rest" << YAML::Value;
  emit_vector(e, r.weights.q_rest);
  e << YAML::EndMap;

  e << YAML::Key << "ocp" << YAML::Value << YAML::BeginMap;
  kv(e, "horizon", std::to_string(c.horizon));
  kv_num(e, "dt", c.ocp_dt);
  kv(e, "max_iterations", std::to_string(c.solver.max_iterations));
  kv_num(e, "gradient_tolerance", c.solver.gradient_tolerance);
  kv_num(e, "cost_tolerance", c.solver.cost_tolerance);
  kv(e, "warm_start_shift", std::to_string(c.solver.warm_start_shift));
  e << YAML::EndMap;

  e << YAML::Key << "step" << YAML::Value << YAML::BeginMap;
  kv_num(e, "rotation_deg", rc.step.rotation_deg);
  e << YAML::Key << "axis" << YAML::Value;
  emit_vector(e, rc.step.axis);
  e << YAML::Key << "w_v" << YAML::Value;
  emit_list(e, rc.step.w_v);
  e << YAML::EndMap;

  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "frequencies" << YAML::Value;
  emit_list(e, rc.sweep.frequencies);
  e << YAML::Key << "methods" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto m : rc.sweep.methods) e << to_string(m);
  e << YAML::EndSeq;
  e << YAML::EndMap;

  e << YAML::Key << "bench" << YAML::Value << YAML::BeginMap;
  kv_num(e, "demo_seconds", rc.bench.demo_seconds);
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

RunConfig preset_config(const std::string& name) {
  RunConfig rc;
  if (name == "step") {
    rc.scenario = default_scenario();
    rc.scenario.duration = 5.0;
  } else if (name == "fig4") {
    ScenarioConfig& c = rc.scenario;
    c = default_scenario();
    c.duration = 60.0;
    c.object.kind = TrajectoryKind::Circular;
    c.object.center = c.object.pose.translation + Eigen::Vector3d(0.0, 0.1, 0.0);
    c.object.angular_rate = 1.0;
    for (int k = 1; k < 12; ++k) c.object.occlusions.push_back({5.0 * k - 1.0, 5.0 * k});
    c.pipeline.localizer.trans_noise_sigma = 0.01;
    c.pipeline.localizer.rot_noise_sigma = 0.02;
    c.pipeline.tracker.trans_noise_sigma = 0.012;
    c.pipeline.tracker.rot_noise_sigma = 0.02;
  } else if (name == "closed-loop") {
    rc.scenario = default_scenario(0.1);
    rc.scenario.duration = 10.0;
    rc.scenario.seed = 1;
  } else {
    throw ValidationError("preset", "unknown preset '" + name + "'");
  }
  return rc;
}

std::vector<std::string> preset_names() { return {"closed-loop", "fig4", "step"}; }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace olt
