#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pecas/dataset.hpp"
#include "pecas/detector.hpp"
#include "pecas/geometry.hpp"
#include "pecas/model.hpp"

namespace pecas {

enum class StreamId { outward, driver };

const char* stream_name(StreamId id) noexcept;

struct FrameEvent {
  StreamId stream = StreamId::outward;
  double timestamp = 0.0;  // seconds
  Tensor frame;            // [1,H,W]
  std::size_t sequence = 0;
};

inline constexpr double kCameraFps = 30.0;

/// Image files of `dir` in file-name order; frame k is stamped k / fps.
/// An empty directory is an empty stream.
std::vector<FrameEvent> stream_from_dir(const std::filesystem::path& dir, StreamId stream, double fps = kCameraFps,
                                        const WarningSink& warn = warn_to_stderr);

struct ScheduledFrame {
  double time = 0.0;  // slot time, seconds
  StreamId stream = StreamId::outward;
  std::size_t index = 0;  // position in the source stream
};

// Staggered acquisition: outward slots at 2k*dt, driver slots at 2k*dt + dt.
// Each slot takes the not-yet-passed frame of its stream whose timestamp is
// nearest the slot time (the earlier one on ties); frames passed over are
// dropped and nothing is emitted twice. Once one stream runs dry the other
// keeps its own slots until it runs dry too.
std::vector<ScheduledFrame> staggered_schedule(std::span<const double> outward_times,
                                               std::span<const double> driver_times, double dt);
std::vector<ScheduledFrame> staggered_schedule(std::span<const FrameEvent> outward, std::span<const FrameEvent> driver,
                                               double dt);

/// Where the eye region sits in each driver frame: one fixed rectangle, or a
/// per-frame table loaded from a JSON-lines file of
/// {"sequence": n, "x": .., "y": .., "w": .., "h": ..} records.
class RoiConfig {
 public:
  enum class Mode { fixed_rect, annotation_file };

  static RoiConfig fixed(const BBox& rect);
  static RoiConfig from_annotation_file(const std::filesystem::path& path);
  static RoiConfig from_annotations(std::map<std::size_t, BBox> table);

  Mode mode() const noexcept { return mode_; }
  /// Throws RoiError when no rectangle is known for the frame.
  BBox rect_for(std::size_t sequence) const;

 private:
  Mode mode_ = Mode::fixed_rect;
  BBox rect_;
  std::map<std::size_t, BBox> table_;
};

/// Parses "x,y,w,h". Throws ConfigError on malformed input.
BBox parse_rect(const std::string& text);

inline constexpr std::size_t kEyeInputSize = 24;

/// Crops the frame's eye rectangle and resamples it to 24x24. Throws RoiError
/// when the rectangle leaves the frame.
Tensor extract_eye_roi(const Tensor& frame, std::size_t sequence, const RoiConfig& config);

struct AlarmEvent {
  double timestamp = 0.0;
  double pedestrian_score = 0.0;
  double drowsiness_score = 0.0;
  double product = 0.0;
  bool alarm = false;

  friend bool operator==(const AlarmEvent&, const AlarmEvent&) = default;
};

inline constexpr double kAlarmThreshold = 0.2;

/// product = pedestrian * drowsiness; alarm iff product > threshold.
/// Throws ContractError when a score is outside [0, 1].
AlarmEvent fuse(double pedestrian_score, double drowsiness_score, double threshold = kAlarmThreshold,
                double timestamp = 0.0);

/// {"t":..,"ped":..,"drowsy":..,"product":..,"alarm":..}
std::string alarm_event_json(const AlarmEvent& event);

struct PipelineConfig {
  double threshold = kAlarmThreshold;
  double dt = 1.0 / kCameraFps;
  double fps = kCameraFps;
  DetectorParams detector;
};

using AlarmSink = std::function<void(const AlarmEvent&)>;

// Replays both directories through the staggered schedule. Outward frames go
// through the detector (frame score = best detection, 0 if none); driver
// frames go through the eye ROI and the eye net (drowsiness = closed-eye
// probability). Every new score is fused with the latest score of the other
// stream, which starts at 0. Frames whose ROI cannot be cropped are reported
// and skipped. Throws ConfigError before touching any frame if the weights or
// settings are unusable.
std::vector<AlarmEvent> run_pipeline(const ModelWeights& pedestrian, const ModelWeights& eye,
                                     const std::filesystem::path& outward_dir, const std::filesystem::path& driver_dir,
                                     const RoiConfig& roi, const PipelineConfig& config, const AlarmSink& sink = {},
                                     const WarningSink& warn = warn_to_stderr);

}  // namespace pecas
