#include "pecas/fusion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "pecas/errors.hpp"
#include "pecas/image.hpp"

namespace fs = std::filesystem;

namespace pecas {

const char* stream_name(StreamId id) noexcept { return id == StreamId::outward ? "outward" : "driver"; }

std::vector<FrameEvent> stream_from_dir(const fs::path& dir, StreamId stream, double fps, const WarningSink& warn) {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ConfigError("frame rate must be positive");
  if (!fs::is_directory(dir)) throw ConfigError(std::string(stream_name(stream)) + " stream '" + dir.string() +
                                                "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm" || ext == ".ppm" || ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  std::vector<FrameEvent> events;
  for (std::size_t k = 0; k < files.size(); ++k) {
    try {
      events.push_back({stream, static_cast<double>(k) / fps, read_image(files[k]), k});
    } catch (const DecodeError& e) {
      warn(std::string("skipping ") + stream_name(stream) + " frame " + files[k].string() + " (" + e.what() + ")");
    }
  }
  return events;
}

std::vector<ScheduledFrame> staggered_schedule(std::span<const double> outward_times,
                                               std::span<const double> driver_times, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ArgumentError("staggered_schedule: dt must be positive");
  for (auto times : {outward_times, driver_times}) {
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1])) throw ArgumentError("staggered_schedule: timestamps must strictly increase");
    }
  }

  std::vector<ScheduledFrame> out;
  std::size_t next[2] = {0, 0};
  const std::span<const double> streams[2] = {outward_times, driver_times};
  for (std::size_t slot = 0; next[0] < streams[0].size() || next[1] < streams[1].size(); ++slot) {
    const std::size_t s = slot % 2;
    const auto times = streams[s];
    if (next[s] >= times.size()) continue;
    const double t = static_cast<double>(slot) * dt;
    std::size_t j = next[s];
    while (j + 1 < times.size() && std::abs(times[j + 1] - t) < std::abs(times[j] - t)) ++j;
    out.push_back({t, s == 0 ? StreamId::outward : StreamId::driver, j});
    next[s] = j + 1;
  }
  return out;
}

std::vector<ScheduledFrame> staggered_schedule(std::span<const FrameEvent> outward, std::span<const FrameEvent> driver,
                                               double dt) {
  std::vector<double> o, d;
  for (const auto& e : outward) o.push_back(e.timestamp);
  for (const auto& e : driver) d.push_back(e.timestamp);
  return staggered_schedule(o, d, dt);
}

RoiConfig RoiConfig::fixed(const BBox& rect) {
  if (!(rect.w >= 1.0 && rect.h >= 1.0)) throw ConfigError("eye rectangle must be at least 1x1 pixels");
  RoiConfig c;
  c.mode_ = Mode::fixed_rect;
  c.rect_ = rect;
  return c;
}

RoiConfig RoiConfig::from_annotations(std::map<std::size_t, BBox> table) {
  RoiConfig c;
  c.mode_ = Mode::annotation_file;
  c.table_ = std::move(table);
  return c;
}

RoiConfig RoiConfig::from_annotation_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ROI annotation file '" + path.string() + "'");
  std::map<std::size_t, BBox> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      table[rec.at("sequence").get<std::size_t>()] = {rec.at("x").get<double>(), rec.at("y").get<double>(),
                                                      rec.at("w").get<double>(), rec.at("h").get<double>()};
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return from_annotations(std::move(table));
}

BBox RoiConfig::rect_for(std::size_t sequence) const {
  if (mode_ == Mode::fixed_rect) return rect_;
  const auto it = table_.find(sequence);
  if (it == table_.end()) throw RoiError("no eye annotation for driver frame " + std::to_string(sequence));
  return it->second;
}

BBox parse_rect(const std::string& text) {
  std::istringstream in(text);
  double v[4];
  char sep;
  for (int i = 0; i < 4; ++i) {
    if (!(in >> v[i])) throw ConfigError("expected x,y,w,h but got '" + text + "'");
    if (i < 3 && !(in >> sep && sep == ',')) throw ConfigError("expected x,y,w,h but got '" + text + "'");
  }
  in >> std::ws;
  if (!in.eof()) throw ConfigError("trailing characters in rectangle '" + text + "'");
  return {v[0], v[1], v[2], v[3]};
}

Tensor extract_eye_roi(const Tensor& frame, std::size_t sequence, const RoiConfig& config) {
  const BBox r = config.rect_for(sequence);
  const double H = static_cast<double>(frame.dim(1));
  const double W = static_cast<double>(frame.dim(2));
  if (!(r.x >= 0.0 && r.y >= 0.0 && r.w >= 1.0 && r.h >= 1.0 && r.right() <= W && r.bottom() <= H)) {
    std::ostringstream msg;
    msg << "eye rectangle (" << r.x << ',' << r.y << ',' << r.w << ',' << r.h << ") outside " << W << 'x' << H
        << " driver frame " << sequence;
    throw RoiError(msg.str());
  }
  return resample_region(frame, r, kEyeInputSize, kEyeInputSize);
}

AlarmEvent fuse(double pedestrian_score, double drowsiness_score, double threshold, double timestamp) {
  for (double s : {pedestrian_score, drowsiness_score}) {
    if (!(s >= 0.0 && s <= 1.0)) throw ContractError("fusion score " + std::to_string(s) + " outside [0, 1]");
  }
  const double product = pedestrian_score * drowsiness_score;
  return {timestamp, pedestrian_score, drowsiness_score, product, product > threshold};
}

std::string alarm_event_json(const AlarmEvent& e) {
  return nlohmann::ordered_json{{"t", e.timestamp},
                                {"ped", e.pedestrian_score},
                                {"drowsy", e.drowsiness_score},
                                {"product", e.product},
                                {"alarm", e.alarm}}
      .dump();
}

std::vector<AlarmEvent> run_pipeline(const ModelWeights& pedestrian, const ModelWeights& eye,
                                     const fs::path& outward_dir, const fs::path& driver_dir, const RoiConfig& roi,
                                     const PipelineConfig& config, const AlarmSink& sink, const WarningSink& warn) {
  try {
    require_model(pedestrian, kPedestrianModel);
    require_model(eye, kEyeModel);
    validate_weights(pedestrian);
    validate_weights(eye);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (!(config.dt > 0.0) || !std::isfinite(config.dt)) throw ConfigError("dt must be positive");
  if (!std::isfinite(config.threshold)) throw ConfigError("threshold must be finite");

  // Decoding of the two streams overlaps; inference below stays on this thread.
  auto outward_future = std::async(std::launch::async, [&] {
    return stream_from_dir(outward_dir, StreamId::outward, config.fps, warn);
  });
  const std::vector<FrameEvent> driver = stream_from_dir(driver_dir, StreamId::driver, config.fps, warn);
  const std::vector<FrameEvent> outward = outward_future.get();

  std::vector<AlarmEvent> events;
  double held_pedestrian = 0.0;
  double held_drowsiness = 0.0;
  for (const ScheduledFrame& slot : staggered_schedule(outward, driver, config.dt)) {
    if (slot.stream == StreamId::outward) {
      const auto detections = detect(pedestrian, outward[slot.index].frame, config.detector);
      held_pedestrian = frame_score(detections);
    } else {
      const FrameEvent& frame = driver[slot.index];
      try {
        const Tensor eyes = extract_eye_roi(frame.frame, frame.sequence, roi);
        held_drowsiness = predict(eye, eyes)[kNegativeClass];
      } catch (const RoiError& e) {
        warn(std::string("skipping driver frame: ") + e.what());
        continue;
      }
    }
    const AlarmEvent event = fuse(held_pedestrian, held_drowsiness, config.threshold, slot.time);
    events.push_back(event);
    if (sink) sink(event);
  }
  return events;
}

}  // namespace pecas
