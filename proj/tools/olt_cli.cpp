#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "olt/config.hpp"
#include "olt/errors.hpp"
#include "olt/experiments.hpp"
#include "olt/report.hpp"

namespace fs = std::filesystem;
using namespace olt;

namespace {

class Output {
 public:
  explicit Output(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) {
      throw std::runtime_error("cannot create output directory '" + dir_.string() + "'");
    }
  }

  template <typename Fn>
  void file(const std::string& name, Fn&& write) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + (dir_ / name).string() + "'");
    write(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + (dir_ / name).string() + "'");
    written_.push_back(name);
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  fs::path dir_;
  std::vector<std::string> written_;
};

Series residual_series(const std::string& name, const std::vector<ControlRecord>& records,
                       bool translation) {
  Series s{name, {}, {}};
  for (std::size_t i = 0; i < records.size(); i += 10) {
    s.x.push_back(records[i].time);
    s.y.push_back(translation ? records[i].trans : records[i].residual);
  }
  return s;
}

void run_step(const RunConfig& rc, Output& out, Summary& summary) {
  const auto traces = step_response(rc.scenario, rc.step.rotation_deg, rc.step.w_v, rc.step.axis);
  LineChart chart{"Step response, reference rotated by " + format_number(rc.step.rotation_deg) +
                      " deg",
                  "time [s]", "weighted pose residual", {}};
  for (const auto& tr : traces) {
    const std::string w = format_number(tr.w_v);
    out.file("step_w" + w + ".csv", [&](std::ostream& os) { write_error_trace_csv(os, tr); });
    summary.add("w" + w + ".steady_trans", tr.steady_trans);
    summary.add("w" + w + ".steady_rot", tr.steady_rot);
    summary.add("w" + w + ".steady_residual", tr.steady_residual);
    summary.add("w" + w + ".steady_lv", tr.steady_lv);
    summary.add("w" + w + ".settling_time", tr.settling_time);
    Series s{"w_v = " + w, {}, {}};
    for (std::size_t i = 0; i < tr.samples.size(); i += 10) {
      s.x.push_back(tr.samples[i].time);
      s.y.push_back(tr.samples[i].residual);
    }
    chart.series.push_back(std::move(s));
  }
  out.file("plot.svg", [&](std::ostream& os) { write_svg(os, chart); });
}

void run_sweep(const RunConfig& rc, Output& out, Summary& summary) {
  const RecallCurve curve = run_recall_sweep(rc.scenario, rc.sweep.frequencies, rc.sweep.methods);
  out.file("recall.csv", [&](std::ostream& os) { write_recall_csv(os, curve); });
  LineChart chart{"Recall against stream frequency", "stream frequency [Hz]", "recall", {}};
  for (const auto m : rc.sweep.methods) {
    Series s{to_string(m), {}, {}};
    for (const double f : rc.sweep.frequencies) {
      const double r = curve.at(m, f);
      summary.add(std::string("recall.") + to_string(m) + "." + format_number(f), r);
      s.x.push_back(f);
      s.y.push_back(r);
    }
    chart.series.push_back(std::move(s));
  }
  const ScenarioConfig c = rc.scenario.resolved();
  const double f0 = rc.sweep.frequencies.front();
  const auto frames = open_loop_frames(c, f0);
  PipelineConfig p = c.pipeline;
  p.stream_period = 1.0 / f0;
  p.buffer_capacity = std::max(p.buffer_capacity, p.min_buffer_capacity());
  const OpenLoopRun run = run_open_loop(frames, p, PipelineMode::Olt, c.duration);
  out.file("events.csv", [&](std::ostream& os) {
    write_event_log_header(os);
    write_event_log(os, run.events);
  });
  out.file("plot.svg", [&](std::ostream& os) { write_svg(os, chart); });
}

// Returns false if a run aborted.
bool run_closed(const RunConfig& rc, Output& out, Summary& summary) {
  const ClosedLoopLog olt_log = run_closed_loop(rc.scenario, PipelineMode::Olt);
  const ClosedLoopLog loc_log = run_closed_loop(rc.scenario, PipelineMode::LocalizerOnly);
  out.file("run.csv", [&](std::ostream& os) { write_run_csv(os, olt_log); });
  out.file("run_localizer_only.csv", [&](std::ostream& os) { write_run_csv(os, loc_log); });
  out.file("events.csv", [&](std::ostream& os) {
    write_event_log_header(os);
    write_event_log(os, olt_log.events);
  });
  out.file("solver.csv", [&](std::ostream& os) { write_solver_csv(os, olt_log); });
  for (const auto* entry : {&olt_log, &loc_log}) {
    const std::string tag = entry == &olt_log ? "olt" : "localizer_only";
    summary.add(tag + ".aborted", entry->aborted ? "1" : "0");
    if (entry->aborted) summary.add(tag + ".abort_reason", "\"" + entry->abort_reason + "\"");
    if (!entry->control.empty()) {
      summary.add(tag + ".median_trans", entry->median_trans());
      summary.add(tag + ".median_residual", entry->median_residual());
    }
    summary.add(tag + ".torque_replay_error", torque_replay_error(*entry, rc.scenario.resolved()));
  }
  LineChart chart{"Closed-loop translation error", "time [s]", "translation error [m]",
                  {residual_series("OLT", olt_log.control, true),
                   residual_series("Localizer only", loc_log.control, true)}};
  out.file("plot.svg", [&](std::ostream& os) { write_svg(os, chart); });
  for (const auto* entry : {&olt_log, &loc_log}) {
    if (entry->aborted) std::cerr << "run aborted: " << entry->abort_reason << '\n';
  }
  return !olt_log.aborted && !loc_log.aborted;
}

void run_bench_experiment(const RunConfig& rc, bool wallclock, Summary& summary) {
  const BenchResult b = run_bench(rc.scenario, wallclock, rc.bench.demo_seconds);
  summary.add("ocp_solve_mean", b.ocp_solve_mean);
  summary.add("ocp_solve_max", b.ocp_solve_max);
  summary.add("policy_eval_mean", b.policy_eval_mean);
  summary.add("solves", static_cast<double>(b.solves));
  if (wallclock) {
    summary.add("wallclock_frames", static_cast<double>(b.wallclock_frames));
    summary.add("wallclock_estimates", static_cast<double>(b.wallclock_estimates));
    summary.add("wallclock_max_age", b.wallclock_max_age);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perception-fed MPC simulator: step response, recall sweep, closed loop, bench"};
  app.set_version_flag("--version", std::string(OLT_VERSION));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run one experiment and write its reports");
  std::string config_path, experiment, out_dir, mode = "virtual";
  std::optional<std::uint64_t> seed;
  run->add_option("--config", config_path, "Scenario file (YAML)")->required()->check(CLI::ExistingFile);
  run->add_option("--experiment", experiment, "Experiment kind")
      ->required()
      ->check(CLI::IsMember({"step", "sweep", "closed-loop", "bench"}));
  run->add_option("--out", out_dir, "Output directory (OLT_OUT_DIR overrides)");
  run->add_option("--seed", seed, "Override scenario.seed");
  run->add_option("--mode", mode, "Clock mode; wallclock only applies to bench")
      ->check(CLI::IsMember({"virtual", "wallclock"}));

  auto* cfg = app.add_subcommand("config", "Print a canonical config: a preset or a parsed file");
  std::string preset, check_path;
  auto* preset_opt = cfg->add_option("--preset", preset, "Built-in preset")
                         ->check(CLI::IsMember(preset_names()));
  cfg->add_option("--file", check_path, "Parse, validate and re-serialize a file")
      ->check(CLI::ExistingFile)
      ->excludes(preset_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*cfg) {
      if (preset.empty() == check_path.empty()) {
        std::cerr << "config: give exactly one of --preset or --file\n";
        return 1;
      }
      const RunConfig rc = preset.empty() ? parse_config(check_path) : preset_config(preset);
      std::cout << serialize_config(rc);
      return 0;
    }

    if (const char* env = std::getenv("OLT_OUT_DIR"); env && *env) out_dir = env;
    if (out_dir.empty()) {
      std::cerr << "run: --out is required when OLT_OUT_DIR is not set\n" << run->help();
      return 1;
    }
    if (mode == "wallclock" && experiment != "bench") {
      std::cerr << "run: --mode wallclock is only available for --experiment bench\n";
      return 1;
    }

    RunConfig rc = parse_config(config_path);
    if (seed) rc.scenario.seed = *seed;
    const std::string canonical = serialize_config(rc);

    Output out(out_dir);
    Summary summary(experiment);
    summary.add("seed", std::to_string(rc.scenario.seed));
    bool ok = true;
    try {
      if (experiment == "step") {
        run_step(rc, out, summary);
      } else if (experiment == "sweep") {
        run_sweep(rc, out, summary);
      } else if (experiment == "closed-loop") {
        ok = run_closed(rc, out, summary);
      } else {
        run_bench_experiment(rc, mode == "wallclock", summary);
      }
    } catch (...) {
      out.file("summary.csv", [&](std::ostream& os) { summary.write(os); });
      throw;
    }
    out.file("summary.csv", [&](std::ostream& os) { summary.write(os); });
    out.file("config.yaml", [&](std::ostream& os) { os << canonical; });

    nlohmann::ordered_json manifest;
    manifest["tool"] = "olt_cli";
    manifest["version"] = OLT_VERSION;
    manifest["config"] = config_path;
    manifest["config_hash"] = "fnv1a64:" + fnv1a_hex(canonical);
    manifest["experiment"] = experiment;
    manifest["mode"] = mode;
    manifest["seed"] = rc.scenario.seed;
    manifest["out"] = out_dir;
    manifest["outputs"] = out.written();
    manifest["complete"] = ok;
    out.file("manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
    return ok ? 0 : 2;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return 2;
  }
}
