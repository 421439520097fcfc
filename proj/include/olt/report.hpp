#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "olt/experiments.hpp"

namespace olt {

/// time,trans,rot,residual
void write_error_trace_csv(std::ostream& out, const ErrorTrace& trace);

/// Per control tick: time, q_i, dq_i, tau_i, policy_id, trans, rot, residual, estimate_valid.
void write_run_csv(std::ostream& out, const ClosedLoopLog& log);

/// One diagnostics row per OCP solve, prefixed by policy_id, estimate_seq and holding.
void write_solver_csv(std::ostream& out, const ClosedLoopLog& log);

/// frequency,method,recall
void write_recall_csv(std::ostream& out, const RecallCurve& curve);

/// Rows of experiment,key,value. Values are written in shortest round-trip form.
class Summary {
 public:
  explicit Summary(std::string experiment) : experiment_(std::move(experiment)) {}
  void add(const std::string& key, double value);
  void add(const std::string& key, const std::string& value);
  void write(std::ostream& out) const;

 private:
  std::string experiment_;
  std::vector<std::pair<std::string, std::string>> rows_;
};

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Stand-alone SVG with axes, ticks and a legend. Non-finite points are skipped.
void write_svg(std::ostream& out, const LineChart& chart, int width = 720, int height = 420);

/// Charts stacked vertically in one document.
void write_svg(std::ostream& out, const std::vector<LineChart>& charts, int width = 720,
               int height = 420);

std::string format_number(double value);

}  // namespace olt
