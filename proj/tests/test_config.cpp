#include <fstream>
#include <sstream>

#include "doctest.h"
#include "olt/config.hpp"
#include "olt/errors.hpp"
#include "olt/report.hpp"

using namespace olt;

namespace {

const char* kMinimal = R"(scenario:
  duration: 2
robot:
  q0: [0, 0.5, -0.3]
reference:
  pose: [0, 0, 0.5, 0, 0, 0, 1]
object:
  kind: static
  pose: [0, 0, 0.6, 0, 0, 0, 1]
pipeline:
  stream_period: 0.05
  localizer:
    delay: 0.2
  tracker:
    delay: 0.005
)";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ValidationError validation_error(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ValidationError& e) {
    return e;
  }
  FAIL("expected a ValidationError");
  return ValidationError("", "");
}

ParseError parse_error(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a ParseError");
  return ParseError(0, "", "");
}

}  // namespace

TEST_CASE("mandatory fields alone give a valid config with defaults") {
  const RunConfig rc = parse_config_text(kMinimal);
  CHECK(rc.scenario.duration == 2.0);
  CHECK(rc.scenario.pipeline.stream_period == 0.05);
  CHECK(rc.scenario.pipeline.localizer.delay == 0.2);
  CHECK(rc.scenario.pipeline.tracker.delay == 0.005);
  CHECK(rc.scenario.q0.size() == 3);
  CHECK(rc.step.w_v == std::vector<double>{10.0, 20.0, 40.0});
  CHECK(rc.sweep.methods.size() == 4);
}

TEST_CASE("every mandatory field is reported by name when missing") {
  const std::pair<const char*, const char*> cases[] = {
      {"  duration: 2\n", "scenario.duration"},
      {"  q0: [0, 0.5, -0.3]\n", "robot.q0"},
      {"  pose: [0, 0, 0.5, 0, 0, 0, 1]\n", "reference.pose"},
      {"  kind: static\n", "object.kind"},
      {"  pose: [0, 0, 0.6, 0, 0, 0, 1]\n", "object.pose"},
      {"  stream_period: 0.05\n", "pipeline.stream_period"},
      {"    delay: 0.2\n", "pipeline.localizer.delay"},
      {"    delay: 0.005\n", "pipeline.tracker.delay"},
  };
  for (const auto& [line, field] : cases) {
    CAPTURE(field);
    const ValidationError e = validation_error(replace(kMinimal, line, ""));
    CHECK(e.field() == field);
  }
}

TEST_CASE("tracker slower than the camera is rejected") {
  const ValidationError e = validation_error(replace(kMinimal, "delay: 0.005", "delay: 0.05"));
  CHECK(e.field() == "pipeline.tracker.delay");
  CHECK(std::string(e.what()).find("stream period") != std::string::npos);
}

TEST_CASE("out of range values are rejected") {
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "duration: 2", "duration: -1")),
                  ValidationError);
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "stream_period: 0.05", "stream_period: 0")),
                  ValidationError);
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "kind: static", "kind: spiral")),
                  ValidationError);
  CHECK_THROWS_AS(parse_config_text(std::string(kMinimal) + "step:\n  w_v: []\n"), ValidationError);
}

TEST_CASE("unknown fields carry their line and path") {
  const ParseError e = parse_error(replace(kMinimal, "  kind: static\n", "  kind: static\n  colour: red\n"));
  CHECK(e.line() == 9);
  CHECK(e.field() == "object.colour");

  const ParseError top = parse_error(std::string(kMinimal) + "extras:\n  a: 1\n");
  CHECK(top.field() == "extras");
  CHECK(top.line() == 16);
}

TEST_CASE("malformed text and wrong types are parse errors") {
  CHECK_THROWS_AS(parse_config_text("scenario: [unclosed\n"), ParseError);
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "duration: 2", "duration: soon")), ParseError);
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "q0: [0, 0.5, -0.3]", "q0: 3")), ParseError);
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "0, 0, 0, 1]", "0, 0, 0, 0]")), ParseError);
  const ParseError e = parse_error(replace(kMinimal, "duration: 2", "duration: soon"));
  CHECK(e.line() == 2);
  CHECK(e.field() == "scenario.duration");
}

TEST_CASE("canonical form is a fixed point") {
  const RunConfig rc = parse_config_text(kMinimal);
  const std::string once = serialize_config(rc);
  const std::string twice = serialize_config(parse_config_text(once));
  CHECK(once == twice);
}

TEST_CASE("shipped configs equal the presets and round-trip byte for byte") {
  for (const std::string name : {"fig4", "step", "closed-loop"}) {
    CAPTURE(name);
    const std::string text = slurp(std::string(OLT_CONFIG_DIR) + "/" + name + ".yaml");
    CHECK(serialize_config(parse_config_text(text)) == text);
    CHECK(serialize_config(preset_config(name)) == text);
  }
  CHECK_THROWS_AS(preset_config("nope"), ValidationError);
}

TEST_CASE("serialized numbers keep every bit") {
  RunConfig rc = preset_config("step");
  rc.scenario.duration = 0.1 + 0.2;
  rc.scenario.pipeline.stream_period = 1.0 / 7.0;
  const RunConfig back = parse_config_text(serialize_config(rc));
  CHECK(back.scenario.duration == rc.scenario.duration);
  CHECK(back.scenario.pipeline.stream_period == rc.scenario.pipeline.stream_period);
  CHECK(back.scenario.object.pose.matrix() == rc.scenario.object.pose.matrix());
}

TEST_CASE("fnv1a known vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("format_number is shortest round trip") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(2.0) == "2");
  CHECK(format_number(1e-9) == "1e-09");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("csv writers") {
  ErrorTrace tr;
  tr.samples.push_back({0.0, 0.5, 0.25, 1.5});
  tr.samples.push_back({0.001, 0.4, 0.2, 1.25});
  std::ostringstream a;
  write_error_trace_csv(a, tr);
  CHECK(a.str() == "time,trans,rot,residual\n0,0.5,0.25,1.5\n0.001,0.4,0.2,1.25\n");

  RecallCurve curve;
  curve.points.push_back({30.0, RecallMethod::Olt, 0.75});
  std::ostringstream b;
  write_recall_csv(b, curve);
  CHECK(b.str() == "frequency,method,recall\n30,OLT,0.75\n");

  Summary s("step");
  s.add("seed", "3");
  s.add("w10.steady_trans", 0.125);
  std::ostringstream c;
  s.write(c);
  CHECK(c.str() == "experiment,key,value\nstep,seed,3\nstep,w10.steady_trans,0.125\n");
}

TEST_CASE("svg has one polyline per series and escapes text") {
  LineChart chart{"a < b & c", "x", "y",
                  {{"one", {0, 1, 2}, {0, 1, 4}}, {"two", {0, 1}, {1, std::nan("")}}}};
  std::ostringstream out;
  write_svg(out, chart);
  const std::string svg = out.str();
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("a &lt; b &amp; c") != std::string::npos);
  std::size_t lines = 0;
  for (auto at = svg.find("<polyline"); at != std::string::npos; at = svg.find("<polyline", at + 1)) {
    ++lines;
  }
  CHECK(lines == 2);
  CHECK(svg.find("nan") == std::string::npos);

  std::ostringstream stacked;
  write_svg(stacked, std::vector<LineChart>{chart, chart}, 720, 420);
  CHECK(stacked.str().find("height=\"840\"") != std::string::npos);
}
