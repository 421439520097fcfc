#include "olt/perception.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "olt/errors.hpp"

namespace olt {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void require(bool ok, const std::string& field, const std::string& constraint) {
  if (!ok) throw ValidationError(field, constraint);
}

void require_sigma(double s, const std::string& field) {
  require(std::isfinite(s) && s >= 0.0, field, "must be finite and >= 0");
}

Eigen::Vector3d gaussian3(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  return sigma * Eigen::Vector3d(x, y, z);
}

// Left perturbation in the camera frame; zero sigmas leave the pose bit-identical.
Pose perturb(const Pose& pose, std::mt19937_64& rng, double sigma_t, double sigma_r) {
  const Eigen::Vector3d dt = gaussian3(rng, sigma_t);
  const Eigen::Vector3d dr = gaussian3(rng, sigma_r);
  Pose out = pose;
  if (sigma_t > 0.0) out.translation += dt;
  if (sigma_r > 0.0) out.rotation = (so3_exp(dr) * pose.rotation).normalized();
  return out;
}

}  // namespace

const char* to_string(PoseSource source) {
  switch (source) {
    case PoseSource::Tracker: return "tracker";
    case PoseSource::Corrector: return "corrector";
    case PoseSource::Localizer: return "localizer";
  }
  return "?";
}

const char* to_string(Worker worker) {
  switch (worker) {
    case Worker::Source: return "source";
    case Worker::Tracker: return "tracker";
    case Worker::Localizer: return "localizer";
    case Worker::Corrector: return "corrector";
  }
  return "?";
}

void LocalizerModel::validate(const std::string& prefix) const {
  require(std::isfinite(delay) && delay > 0.0, prefix + ".delay", "must be > 0");
  require(detect_prob >= 0.0 && detect_prob <= 1.0, prefix + ".detect_prob", "must lie in [0, 1]");
  require_sigma(trans_noise_sigma, prefix + ".trans_noise_sigma");
  require_sigma(rot_noise_sigma, prefix + ".rot_noise_sigma");
}

void TrackerModel::validate(const std::string& prefix) const {
  require(std::isfinite(delay) && delay > 0.0, prefix + ".delay", "must be > 0");
  require(alpha > 0.0 && alpha <= 1.0, prefix + ".alpha", "must lie in (0, 1]");
  require(std::isfinite(basin_trans) && basin_trans >= 0.0, prefix + ".basin_trans",
          "must be finite and >= 0");
  require(basin_rot >= 0.0 && basin_rot < 3.0, prefix + ".basin_rot", "must lie in [0, 3) rad");
  require_sigma(trans_noise_sigma, prefix + ".trans_noise_sigma");
  require_sigma(rot_noise_sigma, prefix + ".rot_noise_sigma");
}

int PipelineConfig::min_buffer_capacity() const {
  return static_cast<int>(std::ceil(localizer.delay / stream_period - 1e-9)) + 2;
}

void PipelineConfig::validate(const std::string& prefix) const {
  require(std::isfinite(stream_period) && stream_period > 0.0, prefix + ".stream_period",
          "must be > 0");
  localizer.validate(prefix + ".localizer");
  tracker.validate(prefix + ".tracker");
  require(tracker.delay < stream_period, prefix + ".tracker.delay",
          "tracker delay must be shorter than the stream period (tracker faster than the camera)");
  require(buffer_capacity >= min_buffer_capacity(), prefix + ".buffer_capacity",
          "must be >= ceil(localizer.delay / stream_period) + 2 = " +
              std::to_string(min_buffer_capacity()));
}

std::uint64_t noise_seed(std::uint64_t seed, std::int64_t frame_seq, RngStream stream) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(frame_seq));
  return splitmix64(h ^ static_cast<std::uint64_t>(stream));
}

std::optional<Pose> simulate_localizer(const TimedFrame& frame, const LocalizerModel& m) {
  std::mt19937_64 rng(noise_seed(m.rng_seed, frame.seq, RngStream::Localizer));
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const Pose noisy = perturb(frame.true_object_pose, rng, m.trans_noise_sigma, m.rot_noise_sigma);
  if (frame.occluded || u >= m.detect_prob) return std::nullopt;
  return noisy;
}

TimedPose simulate_tracker(const TimedFrame& frame, const Pose& init, const TrackerModel& m,
                           RngStream stream) {
  TimedPose out;
  out.frame_seq = frame.seq;
  out.produced_time = frame.capture_time + m.delay;
  out.source = PoseSource::Tracker;
  if (m.identity) {
    out.pose = init;
    out.valid = true;
    return out;
  }
  const PoseError err = pose_distance(init, frame.true_object_pose);
  if (frame.occluded || err.trans > m.basin_trans || err.rot > m.basin_rot) {
    out.pose = init;
    out.valid = false;
    return out;
  }
  std::mt19937_64 rng(noise_seed(m.rng_seed, frame.seq, stream));
  const Pose refined =
      m.alpha == 1.0 ? frame.true_object_pose : interpolate(init, frame.true_object_pose, m.alpha);
  out.pose = perturb(refined, rng, m.trans_noise_sigma, m.rot_noise_sigma);
  out.valid = true;
  return out;
}

TimedPose catch_up(std::span<const TimedFrame> frames, const TimedPose& localized,
                   const TrackerModel& m) {
  TimedPose current = localized;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i > 0 && frames[i].seq != frames[i - 1].seq + 1) {
      throw ValidationError("catch_up.frames", "frames must be contiguous in seq");
    }
    const TimedPose step = simulate_tracker(frames[i], current.pose, m, RngStream::Corrector);
    current.pose = step.pose;
    current.valid = step.valid;
    current.frame_seq = step.frame_seq;
    current.source = PoseSource::Corrector;
    current.produced_time = localized.produced_time + static_cast<double>(i + 1) * m.delay;
  }
  return current;
}

void write_event_log_header(std::ostream& out) { out << "time,worker,event,frame_seq,pose\n"; }

void write_event_log(std::ostream& out, std::span<const PipelineEvent> events) {
  for (const auto& e : events) {
    const std::string frac = std::to_string(e.time % 1000000000);
    out << e.time / 1000000000 << '.' << std::string(9 - frac.size(), '0') << frac << ','
        << to_string(e.worker) << ',' << e.event << ',' << e.frame_seq << ',';
    if (e.pose) out << format_pose(*e.pose);
    out << '\n';
  }
}

void EstimateLog::push(TimedPose p) {
  if (!items_.empty() && p.produced_time < items_.back().produced_time) {
    throw ValidationError("estimate.produced_time", "estimates must be pushed in time order");
  }
  items_.push_back(std::move(p));
}

TimedPose EstimateLog::latest_at(double now) const {
  auto it = std::upper_bound(items_.begin(), items_.end(), now,
                             [](double t, const TimedPose& p) { return t < p.produced_time; });
  if (it == items_.begin()) throw NotInitialized("no pose estimate has been produced yet");
  return *std::prev(it);
}

std::optional<TimedPose> EstimateLog::latest() const {
  if (items_.empty()) return std::nullopt;
  return items_.back();
}

// ---------------------------------------------------------------------------

PerceptionPipeline::PerceptionPipeline(Simulator& sim, PipelineConfig config, PipelineMode mode)
    : sim_(sim),
      config_(std::move(config)),
      mode_(mode),
      track_delay_(to_sim_time(config_.tracker.delay)),
      localize_delay_(to_sim_time(config_.localizer.delay)) {
  config_.validate();
}

void PerceptionPipeline::log(Worker w, std::string event, std::int64_t seq,
                             std::optional<Pose> pose) {
  events_.push_back({sim_.now(), w, std::move(event), seq, std::move(pose)});
}

void PerceptionPipeline::write_event_log(std::ostream& out) const {
  write_event_log_header(out);
  olt::write_event_log(out, events_);
}

void PerceptionPipeline::submit_frame(const TimedFrame& frame) {
  if (newest_ && frame.seq <= newest_->seq) {
    throw ValidationError("frame.seq", "must increase strictly");
  }
  if (newest_ && frame.capture_time <= newest_->capture_time) {
    throw ValidationError("frame.capture_time", "must increase strictly");
  }
  if (to_sim_time(frame.capture_time) != sim_.now()) {
    throw ValidationError("frame.capture_time", "frames must be submitted at their capture time");
  }
  newest_ = frame;
  log(Worker::Source, frame.occluded ? "frame_occluded" : "frame", frame.seq);

  if (mode_ == PipelineMode::LocalizerOnly) {
    sim_.post(sim_.now() + localize_delay_, EventPriority::LocalizerDone, "localizer",
              [this, frame](Simulator& s) {
                if (auto pose = simulate_localizer(frame, config_.localizer)) {
                  published_.push({*pose, frame.seq, s.now_seconds(), PoseSource::Localizer, true});
                  log(Worker::Localizer, "publish", frame.seq, *pose);
                } else {
                  log(Worker::Localizer, "localize_miss", frame.seq);
                }
              },
              "seq=" + std::to_string(frame.seq));
    return;
  }

  // Main tracker: init from a fresh corrector result, else from its own last output.
  std::optional<Pose> init;
  if (injection_) {
    init = injection_->pose;
    log(Worker::Tracker, "inject", injection_->frame_seq, injection_->pose);
    injection_.reset();
  } else if (last_main_) {
    init = last_main_->pose;
  }
  if (init) {
    sim_.post(sim_.now() + track_delay_, EventPriority::TrackerDone, "tracker",
              [this, frame, pose = *init](Simulator& s) {
                TimedPose out = simulate_tracker(frame, pose, config_.tracker);
                out.produced_time = s.now_seconds();
                published_.push(out);
                last_main_ = out;
                log(Worker::Tracker, out.valid ? "track" : "track_lost", frame.seq, out.pose);
              },
              "seq=" + std::to_string(frame.seq));
  } else {
    log(Worker::Tracker, "wait_init", frame.seq);
  }

  if (phase_ == Phase::Idle) {
    start_localizer(frame);
  } else {
    if (static_cast<int>(buffer_.size()) >= config_.buffer_capacity) {
      log(Worker::Corrector, "buffer_overflow", buffer_.front().seq);
      buffer_.pop_front();
      ++overflows_;
    }
    buffer_.push_back(frame);
  }
}

void PerceptionPipeline::start_localizer(const TimedFrame& frame) {
  buffer_.clear();
  localizing_ = frame;
  phase_ = Phase::Localizing;
  log(Worker::Localizer, "localize_start", frame.seq);
  sim_.post(sim_.now() + localize_delay_, EventPriority::LocalizerDone, "localizer",
            [this](Simulator&) { localizer_done(); }, "seq=" + std::to_string(frame.seq));
}

void PerceptionPipeline::localizer_done() {
  const auto pose = simulate_localizer(localizing_, config_.localizer);
  if (!pose) {
    log(Worker::Localizer, "localize_miss", localizing_.seq);
    start_localizer(*newest_);
    return;
  }
  log(Worker::Localizer, "localize_done", localizing_.seq, *pose);
  phase_ = Phase::Correcting;
  corrector_pose_ = {*pose, localizing_.seq, sim_.now_seconds(), PoseSource::Localizer, true};
  corrector_step();
}

void PerceptionPipeline::corrector_step() {
  if (buffer_.empty()) {
    corrector_finish();
    return;
  }
  const TimedFrame frame = buffer_.front();
  buffer_.pop_front();
  sim_.post(sim_.now() + track_delay_, EventPriority::TrackerDone, "corrector",
            [this, frame](Simulator& s) {
              const TimedPose step = simulate_tracker(frame, corrector_pose_.pose, config_.tracker,
                                                      RngStream::Corrector);
              corrector_pose_ = step;
              corrector_pose_.source = PoseSource::Corrector;
              corrector_pose_.produced_time = s.now_seconds();
              log(Worker::Corrector, step.valid ? "correct_step" : "correct_lost", frame.seq,
                  step.pose);
              corrector_step();
            },
            "seq=" + std::to_string(frame.seq));
}

void PerceptionPipeline::corrector_finish() {
  corrector_results_.push_back(corrector_pose_);
  log(Worker::Corrector, corrector_pose_.valid ? "correct_done" : "correct_done_lost",
      corrector_pose_.frame_seq, corrector_pose_.pose);
  if (corrector_pose_.valid) injection_ = corrector_pose_;
  start_localizer(*newest_);
}

OpenLoopRun run_open_loop(std::span<const TimedFrame> frames, const PipelineConfig& config,
                          PipelineMode mode, double t_end) {
  Simulator sim;
  sim.set_tracing(false);
  PerceptionPipeline pipeline(sim, config, mode);
  for (const TimedFrame& f : frames) {
    sim.post(to_sim_time(f.capture_time), EventPriority::FrameArrival, "frame",
             [&pipeline, &f](Simulator&) { pipeline.submit_frame(f); });
  }
  sim.run_until_seconds(t_end);
  return {pipeline.estimates(), pipeline.corrector_results(), pipeline.events(),
          pipeline.overflow_count()};
}

// ---------------------------------------------------------------------------

ThreadedPipeline::ThreadedPipeline(PipelineConfig config)
    : config_(std::move(config)), start_(std::chrono::steady_clock::now()) {
  config_.validate();
  tracker_thread_ = std::thread([this] { tracker_loop(); });
  localizer_thread_ = std::thread([this] { localizer_loop(); });
}

ThreadedPipeline::~ThreadedPipeline() { stop(); }

double ThreadedPipeline::elapsed() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

void ThreadedPipeline::log(Worker w, std::string event, std::int64_t seq,
                           std::optional<Pose> pose) {
  events_.push_back({to_sim_time(elapsed()), w, std::move(event), seq, std::move(pose)});
}

void ThreadedPipeline::submit_frame(const TimedFrame& frame) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (newest_ && frame.seq <= newest_->seq) {
      throw ValidationError("frame.seq", "must increase strictly");
    }
    log(Worker::Source, frame.occluded ? "frame_occluded" : "frame", frame.seq);
    newest_ = frame;
    tracker_queue_.push_back(frame);
    if (!localizer_waiting_frame_) {
      if (static_cast<int>(buffer_.size()) >= config_.buffer_capacity) {
        log(Worker::Corrector, "buffer_overflow", buffer_.front().seq);
        buffer_.pop_front();
      }
      buffer_.push_back(frame);
    }
  }
  tracker_cv_.notify_one();
  localizer_cv_.notify_one();
}

std::optional<TimedPose> ThreadedPipeline::latest() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return published_.latest();
}

std::vector<TimedPose> ThreadedPipeline::estimates() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return published_.all();
}

std::vector<PipelineEvent> ThreadedPipeline::events() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return events_;
}

void ThreadedPipeline::stop() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (stopping_) return;
    stopping_ = true;
  }
  tracker_cv_.notify_all();
  localizer_cv_.notify_all();
  if (tracker_thread_.joinable()) tracker_thread_.join();
  if (localizer_thread_.joinable()) localizer_thread_.join();
}

void ThreadedPipeline::tracker_loop() {
  const auto delay = std::chrono::duration<double>(config_.tracker.delay);
  std::optional<Pose> previous;
  std::unique_lock<std::mutex> lock(mutex_);
  for (;;) {
    tracker_cv_.wait(lock, [this] { return stopping_ || !tracker_queue_.empty(); });
    if (tracker_queue_.empty()) return;
    const TimedFrame frame = tracker_queue_.front();
    tracker_queue_.pop_front();
    std::optional<Pose> init = previous;
    if (injection_) {
      init = injection_->pose;
      log(Worker::Tracker, "inject", injection_->frame_seq, injection_->pose);
      injection_.reset();
    }
    if (!init) {
      log(Worker::Tracker, "wait_init", frame.seq);
      continue;
    }
    lock.unlock();
    std::this_thread::sleep_for(delay);
    TimedPose out = simulate_tracker(frame, *init, config_.tracker);
    lock.lock();
    out.produced_time = elapsed();
    previous = out.pose;
    published_.push(out);
    log(Worker::Tracker, out.valid ? "track" : "track_lost", frame.seq, out.pose);
  }
}

void ThreadedPipeline::localizer_loop() {
  const auto localize = std::chrono::duration<double>(config_.localizer.delay);
  const auto track = std::chrono::duration<double>(config_.tracker.delay);
  std::int64_t last_localized = -1;
  std::unique_lock<std::mutex> lock(mutex_);
  for (;;) {
    localizer_cv_.wait(lock, [&] {
      return stopping_ || (newest_ && newest_->seq != last_localized);
    });
    if (stopping_) return;
    const TimedFrame frame = *newest_;
    last_localized = frame.seq;
    buffer_.clear();
    localizer_waiting_frame_ = false;
    log(Worker::Localizer, "localize_start", frame.seq);
    lock.unlock();
    std::this_thread::sleep_for(localize);
    const auto pose = simulate_localizer(frame, config_.localizer);
    lock.lock();
    if (!pose) {
      log(Worker::Localizer, "localize_miss", frame.seq);
      continue;
    }
    log(Worker::Localizer, "localize_done", frame.seq, *pose);
    TimedPose current{*pose, frame.seq, elapsed(), PoseSource::Corrector, true};
    while (!buffer_.empty() && !stopping_) {
      const TimedFrame next = buffer_.front();
      buffer_.pop_front();
      lock.unlock();
      std::this_thread::sleep_for(track);
      const TimedPose step =
          simulate_tracker(next, current.pose, config_.tracker, RngStream::Corrector);
      lock.lock();
      current.pose = step.pose;
      current.valid = step.valid;
      current.frame_seq = next.seq;
      current.produced_time = elapsed();
      log(Worker::Corrector, step.valid ? "correct_step" : "correct_lost", next.seq, step.pose);
    }
    log(Worker::Corrector, current.valid ? "correct_done" : "correct_done_lost", current.frame_seq,
        current.pose);
    if (current.valid) injection_ = current;
  }
}

}  // namespace olt
