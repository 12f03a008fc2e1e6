#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pecas/geometry.hpp"
#include "pecas/rng.hpp"
#include "pecas/tensor.hpp"

// Synthetic data with the same directory conventions as the real corpora.
// Eye patches are a dark vertical bar (open, label 1) or a dark horizontal
// bar (closed, label 0) on a noisy patch. Pedestrians are a bright
// head/torso/arms/legs silhouette on a cluttered background.
namespace pecas::fixtures {

Tensor render_eye_patch(bool open, std::size_t size, Rng& rng);

/// Noise plus a few random rectangles.
Tensor render_background(std::size_t height, std::size_t width, Rng& rng);

/// Draws the silhouette into the 128x64 box at (x, y) scaled by `scale`
/// (top-left corner fixed). Parts falling outside the image are clipped.
void plant_pedestrian(Tensor& image, double x, double y, double scale, double intensity);

/// One 128x64 classifier window. Positives hold a centred silhouette;
/// negatives are background, off-centre or undersized silhouettes, or poles.
Tensor render_pedestrian_window(bool positive, Rng& rng);

inline constexpr std::size_t kOutwardHeight = 176;
inline constexpr std::size_t kOutwardWidth = 112;

struct PlantedFrame {
  Tensor image;
  std::vector<BBox> plants;
};

/// 176x112 frame with at most one silhouette, aligned to the 16-px window grid.
PlantedFrame render_outward_frame(bool with_pedestrian, Rng& rng);

inline constexpr std::size_t kDriverSize = 96;
inline constexpr BBox kDriverEyeRect{24.0, 24.0, 48.0, 48.0};

/// 96x96 driver frame whose eye patch fills kDriverEyeRect.
Tensor render_driver_frame(bool eyes_open, Rng& rng);

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

struct FixtureSizes {
  Counts eye_train{100, 100}, eye_val{25, 25}, eye_test{25, 25};
  Counts ped_train{150, 150}, ped_val{30, 30}, ped_test{30, 30};
  std::size_t detect_frames = 20;
  std::size_t stream_frames = 24;
};

// Writes, under root:
//   eye/{train,val,test}/{pos,neg}/*.pgm            24x24 eye patches
//   pedestrian/{train,val,test}/{pos,neg}/*.pgm     128x64 windows
//   detect/frames/*.pgm, detect/ground_truth.jsonl  planted detector frames
//   stream/outward, stream/driver                   dual-stream replay
//   stream/driver_open                              eyes open throughout
//   stream/roi.jsonl                                per-frame eye rectangles
void write_fixtures(const std::filesystem::path& root, std::uint64_t seed, const FixtureSizes& sizes = {});

/// Driver frames [closed_from, closed_to) have closed eyes in the stream fixture.
inline constexpr std::size_t kStreamClosedFrom = 10;
/// Outward frames [walk_from, walk_to) contain a pedestrian in the stream fixture.
inline constexpr std::size_t kStreamWalkFrom = 6;
inline constexpr std::size_t kStreamWalkTo = 18;

}  // namespace pecas::fixtures
