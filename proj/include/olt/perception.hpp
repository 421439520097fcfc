#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "olt/geometry.hpp"
#include "olt/sched.hpp"

namespace olt {

/// Camera image stand-in. The true pose is only read by the estimator noise models.
struct TimedFrame {
  std::int64_t seq = 0;
  double capture_time = 0.0;
  Pose true_object_pose;  ///< object in the camera frame
  bool occluded = false;
};

enum class PoseSource { Tracker, Corrector, Localizer };

const char* to_string(PoseSource source);

struct TimedPose {
  Pose pose;
  std::int64_t frame_seq = -1;
  double produced_time = 0.0;
  PoseSource source = PoseSource::Tracker;
  bool valid = false;
};

struct LocalizerModel {
  double delay = 0.25;
  double detect_prob = 1.0;
  double trans_noise_sigma = 0.0;
  double rot_noise_sigma = 0.0;
  std::uint64_t rng_seed = 0;

  void validate(const std::string& prefix = "pipeline.localizer") const;
};

struct TrackerModel {
  double delay = 0.005;
  double basin_trans = 0.05;
  double basin_rot = 0.35;
  double alpha = 1.0;
  double trans_noise_sigma = 0.0;
  double rot_noise_sigma = 0.0;
  std::uint64_t rng_seed = 0;
  /// Replace the tracker by the identity map (init returned, always valid).
  bool identity = false;

  void validate(const std::string& prefix = "pipeline.tracker") const;
};

struct PipelineConfig {
  double stream_period = 1.0 / 30.0;
  LocalizerModel localizer;
  TrackerModel tracker;
  int buffer_capacity = 10;

  /// ceil(delay_localize / stream_period) + 2.
  int min_buffer_capacity() const;
  void validate(const std::string& prefix = "pipeline") const;
};

/// Independent noise streams; a frame draws the same numbers for a given stream.
enum class RngStream : std::uint64_t { MainTracker = 0, Corrector = 1, Localizer = 2 };

/// Counter-based seeding: the generator is a pure function of its arguments.
std::uint64_t noise_seed(std::uint64_t seed, std::int64_t frame_seq, RngStream stream);

/// Detection or nothing. The result becomes available delay seconds after capture.
std::optional<Pose> simulate_localizer(const TimedFrame& frame, const LocalizerModel& m);

/// One local refinement step. Outside the basin (or occluded) the init comes back
/// with valid = false. produced_time is capture_time + delay.
TimedPose simulate_tracker(const TimedFrame& frame, const Pose& init, const TrackerModel& m,
                           RngStream stream = RngStream::MainTracker);

/// Re-tracks the buffered frames in order starting from a localizer result.
/// Returns the pose for the last frame; an empty buffer returns `localized` unchanged.
TimedPose catch_up(std::span<const TimedFrame> frames, const TimedPose& localized,
                   const TrackerModel& m);

enum class PipelineMode {
  Olt,
  /// Localizer on every frame, each result published delay seconds after capture.
  LocalizerOnly,
};

enum class Worker { Source, Tracker, Localizer, Corrector };

const char* to_string(Worker worker);

struct PipelineEvent {
  SimTime time = 0;
  Worker worker = Worker::Source;
  std::string event;
  std::int64_t frame_seq = -1;
  std::optional<Pose> pose;
};

void write_event_log_header(std::ostream& out);
void write_event_log(std::ostream& out, std::span<const PipelineEvent> events);

/// Estimates published by a pipeline, ordered by produced_time.
class EstimateLog {
 public:
  void push(TimedPose p);
  /// Newest estimate with produced_time <= now; throws NotInitialized if none.
  TimedPose latest_at(double now) const;
  std::optional<TimedPose> latest() const;
  const std::vector<TimedPose>& all() const { return items_; }

 private:
  std::vector<TimedPose> items_;
};

/// Localizer, tracker and corrector workers driven by a virtual clock.
/// submit_frame must be called from an event firing at the frame's capture time.
class PerceptionPipeline {
 public:
  PerceptionPipeline(Simulator& sim, PipelineConfig config, PipelineMode mode = PipelineMode::Olt);

  void submit_frame(const TimedFrame& frame);

  TimedPose latest_estimate(double now) const { return published_.latest_at(now); }
  std::optional<TimedPose> latest() const { return published_.latest(); }
  bool initialized() const { return published_.latest().has_value(); }

  const std::vector<TimedPose>& estimates() const { return published_.all(); }
  const std::vector<TimedPose>& corrector_results() const { return corrector_results_; }
  const std::vector<PipelineEvent>& events() const { return events_; }
  const PipelineConfig& config() const { return config_; }
  PipelineMode mode() const { return mode_; }
  std::size_t overflow_count() const { return overflows_; }

  void write_event_log(std::ostream& out) const;

 private:
  enum class Phase { Idle, Localizing, Correcting };

  void log(Worker w, std::string event, std::int64_t seq, std::optional<Pose> pose = {});
  void start_localizer(const TimedFrame& frame);
  void localizer_done();
  void corrector_step();
  void corrector_finish();

  Simulator& sim_;
  PipelineConfig config_;
  PipelineMode mode_;
  SimTime track_delay_;
  SimTime localize_delay_;

  std::optional<TimedFrame> newest_;
  std::deque<TimedFrame> buffer_;
  Phase phase_ = Phase::Idle;
  TimedFrame localizing_;
  TimedPose corrector_pose_;
  std::optional<TimedPose> injection_;
  std::optional<TimedPose> last_main_;

  EstimateLog published_;
  std::vector<TimedPose> corrector_results_;
  std::vector<PipelineEvent> events_;
  std::size_t overflows_ = 0;
};

struct OpenLoopRun {
  std::vector<TimedPose> estimates;
  std::vector<TimedPose> corrector_results;
  std::vector<PipelineEvent> events;
  std::size_t overflows = 0;
};

/// Feeds pre-recorded frames to a fresh virtual-clock pipeline, one arrival event
/// per frame at its capture time, and runs until t_end (exclusive).
OpenLoopRun run_open_loop(std::span<const TimedFrame> frames, const PipelineConfig& config,
                          PipelineMode mode, double t_end);

/// The same architecture on real threads with sleeps standing in for compute.
/// Times are seconds since construction. Intended for demos, not for assertions.
class ThreadedPipeline {
 public:
  explicit ThreadedPipeline(PipelineConfig config);
  ~ThreadedPipeline();
  ThreadedPipeline(const ThreadedPipeline&) = delete;
  ThreadedPipeline& operator=(const ThreadedPipeline&) = delete;

  void submit_frame(const TimedFrame& frame);
  std::optional<TimedPose> latest() const;
  /// Joins the workers after they finish queued work.
  void stop();
  double elapsed() const;

  std::vector<TimedPose> estimates() const;
  std::vector<PipelineEvent> events() const;

 private:
  void tracker_loop();
  void localizer_loop();
  void log(Worker w, std::string event, std::int64_t seq, std::optional<Pose> pose = {});

  PipelineConfig config_;
  std::chrono::steady_clock::time_point start_;

  mutable std::mutex mutex_;
  std::condition_variable tracker_cv_;
  std::condition_variable localizer_cv_;
  bool stopping_ = false;
  std::deque<TimedFrame> tracker_queue_;
  std::deque<TimedFrame> buffer_;
  std::optional<TimedFrame> newest_;
  bool localizer_waiting_frame_ = true;
  std::optional<TimedPose> injection_;
  EstimateLog published_;
  std::vector<PipelineEvent> events_;

  std::thread tracker_thread_;
  std::thread localizer_thread_;
};

}  // namespace olt
