#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "olt/config.hpp"
#include "olt/errors.hpp"
#include "olt/experiments.hpp"
#include "olt/geometry.hpp"
#include "olt/ocp.hpp"
#include "olt/report.hpp"
#include "olt/robot.hpp"

namespace py = pybind11;
using namespace olt;

namespace {

// Rotation as (x, y, z, w).
Eigen::Vector4d quat_xyzw(const Eigen::Quaterniond& q) { return {q.x(), q.y(), q.z(), q.w()}; }

Eigen::Quaterniond from_xyzw(const Eigen::Vector4d& v) {
  return Eigen::Quaterniond(v[3], v[0], v[1], v[2]);
}

PipelineMode parse_mode(const std::string& mode) {
  if (mode == "olt") return PipelineMode::Olt;
  if (mode == "localizer-only") return PipelineMode::LocalizerOnly;
  throw py::value_error("mode must be 'olt' or 'localizer-only'");
}

py::dict trace_dict(const ErrorTrace& tr) {
  const auto n = static_cast<py::ssize_t>(tr.samples.size());
  py::array_t<double> t(n), trans(n), rot(n), res(n);
  auto tv = t.mutable_unchecked<1>(), av = trans.mutable_unchecked<1>();
  auto rv = rot.mutable_unchecked<1>(), sv = res.mutable_unchecked<1>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& s = tr.samples[static_cast<std::size_t>(i)];
    tv(i) = s.time;
    av(i) = s.trans;
    rv(i) = s.rot;
    sv(i) = s.residual;
  }
  py::dict d;
  d["w_v"] = tr.w_v;
  d["time"] = t;
  d["trans"] = trans;
  d["rot"] = rot;
  d["residual"] = res;
  d["steady_trans"] = tr.steady_trans;
  d["steady_rot"] = tr.steady_rot;
  d["steady_residual"] = tr.steady_residual;
  d["steady_lv"] = tr.steady_lv;
  d["settling_time"] = tr.settling_time;
  return d;
}

py::dict closed_loop_dict(const ClosedLoopLog& log, const ScenarioConfig& config) {
  const auto n = static_cast<py::ssize_t>(log.control.size());
  const py::ssize_t dof = n ? log.control.front().x.q.size() : 0;
  py::array_t<double> t(n), trans(n), rot(n), res(n);
  py::array_t<double> q({n, dof}), tau({n, dof});
  py::array_t<bool> valid(n);
  auto tv = t.mutable_unchecked<1>(), av = trans.mutable_unchecked<1>();
  auto rv = rot.mutable_unchecked<1>(), sv = res.mutable_unchecked<1>();
  auto qv = q.mutable_unchecked<2>(), uv = tau.mutable_unchecked<2>();
  auto vv = valid.mutable_unchecked<1>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& r = log.control[static_cast<std::size_t>(i)];
    tv(i) = r.time;
    av(i) = r.trans;
    rv(i) = r.rot;
    sv(i) = r.residual;
    vv(i) = r.estimate_valid;
    for (py::ssize_t j = 0; j < dof; ++j) {
      qv(i, j) = r.x.q[j];
      uv(i, j) = r.tau[j];
    }
  }
  py::dict d;
  d["time"] = t;
  d["q"] = q;
  d["tau"] = tau;
  d["trans"] = trans;
  d["rot"] = rot;
  d["residual"] = res;
  d["estimate_valid"] = valid;
  d["aborted"] = log.aborted;
  d["abort_reason"] = log.abort_reason;
  d["solves"] = log.solves.size();
  d["estimates"] = log.estimates.size();
  d["median_trans"] = n ? log.median_trans() : std::nan("");
  d["median_residual"] = n ? log.median_residual() : std::nan("");
  d["torque_replay_error"] = torque_replay_error(log, config);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Perception-fed MPC: SE(3) tools, OCP solve, simulated experiments";
  m.attr("__version__") = OLT_VERSION;

  auto error = py::register_exception<Error>(m, "OltError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<AngleNearPi>(m, "AngleNearPi", error.ptr());
  py::register_exception<SolverDiverged>(m, "SolverDiverged", error.ptr());

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init([](const Eigen::Vector4d& q, const Eigen::Vector3d& t) {
             return Pose(from_xyzw(q).normalized(), t);
           }),
           py::arg("quat_xyzw"), py::arg("translation"))
      .def_static("from_translation", &Pose::from_translation)
      .def_static("from_axis_angle", &Pose::from_axis_angle, py::arg("axis"), py::arg("angle"))
      .def_static("from_matrix", &Pose::from_matrix)
      .def_static("exp", [](const Vector6d& xi) { return exp(xi); }, "Twist (v, omega) to pose")
      .def_static("parse", &parse_pose)
      .def_property_readonly("translation", [](const Pose& p) -> Eigen::Vector3d { return p.translation; })
      .def_property_readonly("quat_xyzw", [](const Pose& p) { return quat_xyzw(p.rotation); })
      .def("matrix", &Pose::matrix)
      .def("log", [](const Pose& p) { return log(p).vector(); }, "Twist (v, omega)")
      .def("inverse", [](const Pose& p) { return inverse(p); })
      .def("__mul__", [](const Pose& a, const Pose& b) { return a * b; })
      .def("__mul__", [](const Pose& a, const Eigen::Vector3d& x) -> Eigen::Vector3d { return a * x; })
      .def("__repr__", [](const Pose& p) { return "Pose(" + format_pose(p) + ")"; })
      .def("__str__", &format_pose);

  m.def("interpolate", &interpolate, py::arg("a"), py::arg("b"), py::arg("alpha"));
  m.def("pose_distance", [](const Pose& a, const Pose& b) {
        const PoseError e = pose_distance(a, b);
        return py::make_tuple(e.trans, e.rot);
      },
      "(translation [m], rotation [rad]) between two poses");

  py::class_<KinematicChain>(m, "KinematicChain")
      .def_property_readonly("dof", &KinematicChain::dof);
  m.def("make_arm3", &make_arm3);
  m.def("make_pendulum", &make_pendulum, py::arg("mass"), py::arg("com_distance"),
        py::arg("gravity") = 9.81);
  m.def("forward_kinematics", &forward_kinematics, py::arg("chain"), py::arg("q"));
  m.def("rnea", py::overload_cast<const KinematicChain&, const Eigen::VectorXd&, const Eigen::VectorXd&,
                                  const Eigen::VectorXd&>(&rnea),
        py::arg("chain"), py::arg("q"), py::arg("dq"), py::arg("ddq"));
  m.def("aba", py::overload_cast<const KinematicChain&, const Eigen::VectorXd&, const Eigen::VectorXd&,
                                 const Eigen::VectorXd&>(&aba),
        py::arg("chain"), py::arg("q"), py::arg("dq"), py::arg("tau"));
  m.def("gravity_torque",
        py::overload_cast<const KinematicChain&, const Eigen::VectorXd&>(&gravity_torque),
        py::arg("chain"), py::arg("q"));

  m.def(
      "solve_tracking",
      [](const KinematicChain& chain, const Eigen::VectorXd& q, const Eigen::VectorXd& dq,
         const Pose& object_in_camera, const Pose& desired, double w_v, int horizon, double dt) {
        OcpProblem p;
        p.model = chain;
        p.weights = CostWeights::defaults(q);
        p.weights.w_v = w_v;
        p.reference = TrackingReference{object_in_camera, q, desired};
        p.horizon = horizon;
        p.dt = dt;
        p.x0 = RobotState(q, dq);
        const OcpSolution s = solve_ocp(p);
        py::dict d;
        d["tau0"] = s.tau0;
        d["K0"] = s.K0;
        d["cost"] = s.cost;
        d["iterations"] = s.iterations;
        d["converged"] = s.converged;
        d["gradient_norm"] = s.gradient_norm;
        d["cost_trace"] = s.cost_trace;
        return d;
      },
      py::arg("chain"), py::arg("q"), py::arg("dq"), py::arg("object_in_camera"), py::arg("desired"),
      py::arg("w_v") = 20.0, py::arg("horizon") = 20, py::arg("dt") = 0.02,
      "One OCP solve from (q, dq) toward the desired camera-to-object pose");

  py::class_<RunConfig>(m, "RunConfig")
      .def_property(
          "seed", [](const RunConfig& c) { return c.scenario.seed; },
          [](RunConfig& c, std::uint64_t s) { c.scenario.seed = s; })
      .def_property(
          "duration", [](const RunConfig& c) { return c.scenario.duration; },
          [](RunConfig& c, double d) { c.scenario.duration = d; })
      .def_property(
          "stream_period", [](const RunConfig& c) { return c.scenario.pipeline.stream_period; },
          [](RunConfig& c, double p) { c.scenario.pipeline.stream_period = p; })
      .def_property(
          "w_v", [](const RunConfig& c) { return c.scenario.weights.w_v; },
          [](RunConfig& c, double w) { c.scenario.weights.w_v = w; })
      .def("validate", &RunConfig::validate)
      .def("to_yaml", &serialize_config)
      .def("__repr__", [](const RunConfig& c) {
        std::ostringstream s;
        s << "RunConfig(duration=" << format_number(c.scenario.duration) << ", seed=" << c.scenario.seed
          << ")";
        return s.str();
      });

  m.def("parse_config_text", &parse_config_text, py::arg("text"));
  m.def("parse_config", &parse_config, py::arg("path"));
  m.def("serialize_config", &serialize_config, py::arg("config"));
  m.def("preset_config", &preset_config, py::arg("name"));
  m.def("preset_names", &preset_names);

  m.def(
      "step_response",
      [](const RunConfig& c, std::optional<double> rotation_deg, std::optional<std::vector<double>> w_v) {
        const std::vector<double> ws = w_v ? *w_v : c.step.w_v;
        py::list out;
        for (const auto& tr : step_response(c.scenario, rotation_deg.value_or(c.step.rotation_deg), ws,
                                            c.step.axis)) {
          out.append(trace_dict(tr));
        }
        return out;
      },
      py::arg("config"), py::arg("rotation_deg") = py::none(), py::arg("w_v") = py::none(),
      "One error trace per w_v after a step in the reference rotation");

  m.def(
      "recall_sweep",
      [](const RunConfig& c, std::optional<std::vector<double>> frequencies,
         std::optional<std::vector<std::string>> methods) {
        std::vector<RecallMethod> ms = c.sweep.methods;
        if (methods) {
          ms.clear();
          for (const auto& name : *methods) {
            const auto parsed = parse_recall_method(name);
            if (!parsed) throw py::value_error("unknown recall method '" + name + "'");
            ms.push_back(*parsed);
          }
        }
        const std::vector<double> fs = frequencies ? *frequencies : c.sweep.frequencies;
        const RecallCurve curve = run_recall_sweep(c.scenario, fs, ms);
        py::list out;
        for (const auto& p : curve.points) {
          out.append(py::make_tuple(p.frequency, to_string(p.method), p.recall));
        }
        return out;
      },
      py::arg("config"), py::arg("frequencies") = py::none(), py::arg("methods") = py::none(),
      "List of (frequency, method, recall)");

  m.def(
      "closed_loop",
      [](const RunConfig& c, const std::string& mode) {
        const PipelineMode m = parse_mode(mode);
        ClosedLoopLog log;
        {
          py::gil_scoped_release release;
          log = run_closed_loop(c.scenario, m);
        }
        return closed_loop_dict(log, c.scenario.resolved());
      },
      py::arg("config"), py::arg("mode") = "olt",
      "Closed loop on the virtual clock; mode is 'olt' or 'localizer-only'");
}
