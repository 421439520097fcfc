#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "olt/perception.hpp"

namespace olt::test {

struct Audit {
  std::vector<std::string> failures;
  // Informational.
  std::size_t checked = 0;
  double worst = 0.0;

  bool ok() const { return failures.empty(); }
  void fail(std::string what) {
    if (failures.size() < 20) failures.push_back(std::move(what));
  }
};

inline std::map<std::int64_t, SimTime> capture_times(std::span<const PipelineEvent> events) {
  std::map<std::int64_t, SimTime> out;
  for (const auto& e : events) {
    if (e.worker == Worker::Source) out[e.frame_seq] = e.time;
  }
  return out;
}

inline bool is_main_output(const PipelineEvent& e) {
  return e.worker == Worker::Tracker && (e.event == "track" || e.event == "track_lost");
}

// Main-tracker outputs appear exactly one tracker delay after their frame.
inline Audit audit_freshness(std::span<const PipelineEvent> events, const PipelineConfig& cfg) {
  Audit a;
  const auto capture = capture_times(events);
  const SimTime dt = to_sim_time(cfg.tracker.delay);
  for (const auto& e : events) {
    if (!is_main_output(e)) continue;
    ++a.checked;
    const SimTime age = e.time - capture.at(e.frame_seq);
    a.worst = std::max(a.worst, to_seconds(age));
    if (age != dt) a.fail("frame " + std::to_string(e.frame_seq) + " age " + std::to_string(age));
  }
  return a;
}

// Every localization that detects is followed by a catch-up that drains the buffer
// before the next localization starts, with a bounded number of steps.
inline Audit audit_liveness(std::span<const PipelineEvent> events, const PipelineConfig& cfg) {
  Audit a;
  const double di = cfg.stream_period;
  const int base = static_cast<int>(std::ceil(cfg.localizer.delay / di - 1e-9));
  bool correcting = false;
  int steps = 0;
  for (const auto& e : events) {
    if (e.event == "buffer_overflow") a.fail("buffer overflow at seq " + std::to_string(e.frame_seq));
    if (e.worker == Worker::Localizer && e.event == "localize_done") {
      if (correcting) a.fail("localizer finished while the corrector was still running");
      correcting = true;
      steps = 0;
    } else if (e.worker == Worker::Localizer && e.event == "localize_start") {
      if (correcting) a.fail("localizer restarted before the corrector finished");
    } else if (e.worker == Worker::Corrector &&
               (e.event == "correct_step" || e.event == "correct_lost")) {
      if (!correcting) a.fail("corrector step outside a catch-up");
      ++steps;
    } else if (e.worker == Worker::Corrector &&
               (e.event == "correct_done" || e.event == "correct_done_lost")) {
      ++a.checked;
      const double runtime = steps * cfg.tracker.delay;
      const int bound = base + static_cast<int>(std::ceil(runtime / di - 1e-9));
      a.worst = std::max(a.worst, static_cast<double>(steps));
      if (steps > bound) {
        a.fail("catch-up of " + std::to_string(steps) + " frames exceeds " + std::to_string(bound));
      }
      correcting = false;
    }
  }
  return a;
}

struct OcclusionWindow {
  SimTime first_occluded;
  SimTime first_visible;
  std::int64_t visible_seq;
};

inline std::vector<OcclusionWindow> occlusion_windows(std::span<const PipelineEvent> events) {
  std::vector<OcclusionWindow> out;
  std::optional<SimTime> begin;
  for (const auto& e : events) {
    if (e.worker != Worker::Source) continue;
    if (e.event == "frame_occluded") {
      if (!begin) begin = e.time;
    } else if (begin) {
      out.push_back({*begin, e.time, e.frame_seq});
      begin.reset();
    }
  }
  return out;
}

// After an occlusion of at least delay_localize + 2 stream periods, a valid
// main-tracker output appears within `bound` seconds of the first visible frame.
inline Audit audit_recovery(std::span<const PipelineEvent> events, const PipelineConfig& cfg,
                            double bound) {
  Audit a;
  const SimTime min_len = to_sim_time(cfg.localizer.delay + 2 * cfg.stream_period);
  for (const auto& w : occlusion_windows(events)) {
    if (w.first_visible - w.first_occluded < min_len) continue;
    ++a.checked;
    std::optional<SimTime> recovered;
    for (const auto& e : events) {
      if (e.time >= w.first_visible && e.worker == Worker::Tracker && e.event == "track" &&
          e.frame_seq >= w.visible_seq) {
        recovered = e.time;
        break;
      }
    }
    if (!recovered) {
      a.fail("no recovery after occlusion ending at seq " + std::to_string(w.visible_seq));
      continue;
    }
    const double latency = to_seconds(*recovered - w.first_visible);
    a.worst = std::max(a.worst, latency);
    if (latency > bound + 1e-12) {
      a.fail("recovery after seq " + std::to_string(w.visible_seq) + " took " +
             std::to_string(latency) + " s");
    }
  }
  return a;
}

/// delay_localize + (N + 1) * delay_track with N = ceil(delay_localize / stream_period).
inline double recovery_bound(const PipelineConfig& cfg) {
  const double n = std::ceil(cfg.localizer.delay / cfg.stream_period - 1e-9);
  return cfg.localizer.delay + (n + 1.0) * cfg.tracker.delay;
}

/// Recovery when the object left the tracker basin while hidden: the localizer
/// is busy on an occluded frame, misses, and restarts on a visible one.
inline double localizer_path_bound(const PipelineConfig& cfg) {
  const double di = cfg.stream_period;
  const double dl = cfg.localizer.delay;
  const double dt = cfg.tracker.delay;
  const double steps = std::ceil(dl / di) / (1.0 - dt / di) + 1.0;
  return 2 * dl + std::ceil(steps) * dt + di + dt;
}

}  // namespace olt::test
