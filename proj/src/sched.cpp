#include "olt/sched.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>

#include "olt/errors.hpp"

namespace olt {

SimTime to_sim_time(double seconds) { return std::llround(seconds * 1e9); }

double to_seconds(SimTime t) { return static_cast<double>(t) * 1e-9; }

SimTime periodic_time(SimTime start, double period_seconds, std::int64_t k) {
  return start + std::llround(static_cast<double>(k) * period_seconds * 1e9);
}

bool Simulator::Later::operator()(const Event& a, const Event& b) const {
  if (a.time != b.time) return a.time > b.time;
  if (a.priority != b.priority) return a.priority > b.priority;
  return a.seq > b.seq;
}

void Simulator::post(SimTime fire_time, int priority, std::string task, Action action,
                     std::string detail) {
  if (fire_time < now_) {
    throw ValidationError("event.fire_time", "must not precede the current clock");
  }
  queue_.push_back({fire_time, priority, next_seq_++, std::move(task), std::move(detail),
                    std::move(action)});
  std::push_heap(queue_.begin(), queue_.end(), Later{});
}

void Simulator::post_periodic(SimTime start, double period_seconds, EventPriority priority,
                              std::string task, PeriodicAction action) {
  if (!(period_seconds > 0.0)) throw ValidationError("event.period", "must be positive");
  auto fn = std::make_shared<PeriodicAction>(std::move(action));
  auto step = std::make_shared<std::function<void(Simulator&, std::int64_t)>>();
  *step = [start, period_seconds, priority, task, fn, weak = std::weak_ptr(step)](
              Simulator& sim, std::int64_t k) {
    (*fn)(sim, k);
    const SimTime next = periodic_time(start, period_seconds, k + 1);
    auto self = weak.lock();
    sim.post(next, priority, task, [self, k](Simulator& s) { (*self)(s, k + 1); });
  };
  post(start, priority, task, [step](Simulator& s) { (*step)(s, 0); });
}

void Simulator::run_until(SimTime t_end) {
  if (t_end < now_) throw ValidationError("run_until.t_end", "must not precede the current clock");
  if (stop_requested_) return;
  while (!queue_.empty() && queue_.front().time < t_end) {
    std::pop_heap(queue_.begin(), queue_.end(), Later{});
    Event ev = std::move(queue_.back());
    queue_.pop_back();
    now_ = ev.time;
    if (tracing_) trace_.push_back({ev.time, ev.priority, ev.task, std::move(ev.detail)});
    ++executed_;
    ev.action(*this);
    if (stop_requested_) return;
  }
  now_ = t_end;
}

void Simulator::write_trace_csv(std::ostream& out) const {
  out << "time,priority,task,detail\n";
  for (const auto& e : trace_) {
    out << e.time / 1000000000 << '.';
    const auto frac = e.time % 1000000000;
    const std::string digits = std::to_string(frac);
    out << std::string(9 - digits.size(), '0') << digits << ',' << e.priority << ',' << e.task
        << ',' << e.detail << '\n';
  }
}

}  // namespace olt
