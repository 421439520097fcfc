#include "olt/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

namespace olt {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_number(v[i]);
}

void put_names(std::ostream& out, const char* prefix, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) out << ',' << prefix << i;
}

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// 1, 2 or 5 times a power of ten, giving about `target` steps over the span.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (const double m : {1.0, 2.0, 5.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

std::string tick_label(double v, double step) {
  char buf[32];
  const int digits = std::max(0, static_cast<int>(-std::floor(std::log10(step) + 1e-9)));
  std::snprintf(buf, sizeof(buf), "%.*f", digits, std::abs(v) < 1e-12 * step ? 0.0 : v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

void chart_body(std::ostream& out, const LineChart& chart, int width, int height, int y0) {
  const double left = 70, right = 170, top = 36, bottom = 48;
  const double pw = width - left - right, ph = height - top - bottom;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax - xmin < 1e-12) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  const auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  const auto sy = [&](double y) { return y0 + top + (ymax - y) / (ymax - ymin) * ph; };

  out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << y0 + 22
      << "\" text-anchor=\"middle\" font-size=\"15\">" << escape(chart.title) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << y0 + top << "\" width=\"" << pw << "\" height=\""
      << ph << "\" fill=\"none\" stroke=\"#444\"/>\n";

  const double xs = nice_step(xmax - xmin, 8), ys = nice_step(ymax - ymin, 6);
  for (double t = std::ceil(xmin / xs) * xs; t <= xmax + 1e-9 * xs; t += xs) {
    out << "<line x1=\"" << sx(t) << "\" y1=\"" << y0 + top + ph << "\" x2=\"" << sx(t)
        << "\" y2=\"" << y0 + top << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << sx(t) << "\" y=\"" << y0 + top + ph + 16
        << "\" text-anchor=\"middle\">" << tick_label(t, xs) << "</text>\n";
  }
  for (double t = std::ceil(ymin / ys) * ys; t <= ymax + 1e-9 * ys; t += ys) {
    out << "<line x1=\"" << left << "\" y1=\"" << sy(t) << "\" x2=\"" << left + pw << "\" y2=\""
        << sy(t) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << sy(t) + 4 << "\" text-anchor=\"end\">"
        << tick_label(t, ys) << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << y0 + height - 10
      << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
  out << "<text transform=\"translate(16," << y0 + top + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(chart.y_label) << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!first) out << ' ';
      first = false;
      out << sx(s.x[i]) << ',' << sy(s.y[i]);
    }
    out << "\"/>\n";
    const double ly = y0 + top + 14 + 18.0 * static_cast<double>(k);
    out << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 36
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly << "\">" << escape(s.name)
        << "</text>\n";
  }
  out << "</g>\n";
}

}  // namespace

void write_error_trace_csv(std::ostream& out, const ErrorTrace& trace) {
  out << "time,trans,rot,residual\n";
  for (const auto& s : trace.samples) {
    out << format_number(s.time) << ',' << format_number(s.trans) << ',' << format_number(s.rot)
        << ',' << format_number(s.residual) << '\n';
  }
}

void write_run_csv(std::ostream& out, const ClosedLoopLog& log) {
  const Eigen::Index n = log.control.empty() ? 0 : log.control.front().x.q.size();
  out << "time";
  put_names(out, "q", n);
  put_names(out, "dq", n);
  put_names(out, "tau", n);
  out << ",policy_id,trans,rot,residual,estimate_valid\n";
  for (const auto& r : log.control) {
    out << format_number(r.time);
    put_vector(out, r.x.q);
    put_vector(out, r.x.dq);
    put_vector(out, r.tau);
    out << ',' << r.policy_id << ',' << format_number(r.trans) << ',' << format_number(r.rot)
        << ',' << format_number(r.residual) << ',' << (r.estimate_valid ? 1 : 0) << '\n';
  }
}

void write_solver_csv(std::ostream& out, const ClosedLoopLog& log) {
  out << "time,policy_id,estimate_seq,holding,iterations,cost,gradient_norm,regularization,"
         "converged,wall_time\n";
  for (const auto& s : log.solves) {
    out << format_number(s.time) << ',' << s.policy_id << ',' << s.estimate_seq << ','
        << (s.holding ? 1 : 0) << ',' << s.solution.iterations << ','
        << format_number(s.solution.cost) << ',' << format_number(s.solution.gradient_norm) << ','
        << format_number(s.solution.regularization) << ',' << (s.solution.converged ? 1 : 0)
        << ',' << format_number(s.solution.wall_time) << '\n';
  }
}

void write_recall_csv(std::ostream& out, const RecallCurve& curve) {
  out << "frequency,method,recall\n";
  for (const auto& p : curve.points) {
    out << format_number(p.frequency) << ',' << to_string(p.method) << ','
        << format_number(p.recall) << '\n';
  }
}

void Summary::add(const std::string& key, double value) { rows_.emplace_back(key, format_number(value)); }

void Summary::add(const std::string& key, const std::string& value) { rows_.emplace_back(key, value); }

void Summary::write(std::ostream& out) const {
  out << "experiment,key,value\n";
  for (const auto& [k, v] : rows_) out << experiment_ << ',' << k << ',' << v << '\n';
}

void write_svg(std::ostream& out, const LineChart& chart, int width, int height) {
  write_svg(out, std::vector<LineChart>{chart}, width, height);
}

void write_svg(std::ostream& out, const std::vector<LineChart>& charts, int width, int height) {
  const int total = height * static_cast<int>(std::max<std::size_t>(1, charts.size()));
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << total
      << "\" viewBox=\"0 0 " << width << ' ' << total << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < charts.size(); ++i) {
    chart_body(out, charts[i], width, height, static_cast<int>(i) * height);
  }
  out << "</svg>\n";
}

}  // namespace olt
