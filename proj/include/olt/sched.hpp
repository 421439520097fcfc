#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace olt {

/// Virtual time in integer nanoseconds.
using SimTime = std::int64_t;

SimTime to_sim_time(double seconds);
double to_seconds(SimTime t);
/// start + round(k * period): the k-th firing of a periodic task.
SimTime periodic_time(SimTime start, double period_seconds, std::int64_t k);

/// Tie-break order for events sharing a timestamp (lower runs first).
enum class EventPriority : int {
  ControlTick = 0,
  OcpTick = 1,
  TrackerDone = 2,
  LocalizerDone = 3,
  FrameArrival = 4,
};

struct TraceEntry {
  SimTime time = 0;
  int priority = 0;
  std::string task;
  std::string detail;
};

/// Single-threaded discrete-event kernel. Events run in (fire_time, priority,
/// insertion order); actions may post further events.
class Simulator {
 public:
  using Action = std::function<void(Simulator&)>;
  using PeriodicAction = std::function<void(Simulator&, std::int64_t k)>;

  SimTime now() const { return now_; }
  double now_seconds() const { return to_seconds(now_); }

  /// Throws ValidationError if fire_time precedes the clock.
  void post(SimTime fire_time, int priority, std::string task, Action action,
            std::string detail = {});
  void post(SimTime fire_time, EventPriority priority, std::string task, Action action,
            std::string detail = {}) {
    post(fire_time, static_cast<int>(priority), std::move(task), std::move(action),
         std::move(detail));
  }

  /// Fires at start + round(k * period) for k = 0, 1, ... The k-th firing is
  /// scheduled when the (k-1)-th runs, so no drift accumulates.
  void post_periodic(SimTime start, double period_seconds, EventPriority priority,
                     std::string task, PeriodicAction action);

  /// Executes every event with fire_time < t_end, then sets the clock to t_end.
  void run_until(SimTime t_end);
  void run_until_seconds(double t_end) { run_until(to_sim_time(t_end)); }

  /// Makes the current run_until return after the running event; the clock stays there.
  void request_stop() { stop_requested_ = true; }
  bool stopped() const { return stop_requested_; }

  std::size_t pending() const { return queue_.size(); }
  std::size_t executed() const { return executed_; }

  void set_tracing(bool enabled) { tracing_ = enabled; }
  const std::vector<TraceEntry>& trace() const { return trace_; }
  void write_trace_csv(std::ostream& out) const;

 private:
  struct Event {
    SimTime time;
    int priority;
    std::uint64_t seq;
    std::string task;
    std::string detail;
    Action action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const;
  };

  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::size_t executed_ = 0;
  bool tracing_ = true;
  bool stop_requested_ = false;
  std::vector<Event> queue_;
  std::vector<TraceEntry> trace_;
};

}  // namespace olt
