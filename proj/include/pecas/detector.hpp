#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pecas/geometry.hpp"
#include "pecas/model.hpp"
#include "pecas/tensor.hpp"

namespace pecas {

struct Detection {
  BBox box;      // source-image pixels
  double score;  // positive-class softmax

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct WindowSize {
  std::size_t height = 128;
  std::size_t width = 64;
};

struct DetectorParams {
  double scale_factor = 1.2;
  std::size_t stride = 16;
  double score_floor = 0.5;
  double nms_iou = 0.5;
};

struct PyramidLevel {
  double scale = 1.0;  // source pixels per level pixel
  Tensor image;
};

/// Level k is the image resized to floor(H / f^k) x floor(W / f^k); levels
/// stop before either side drops under min_size. An image smaller than
/// min_size yields no levels.
std::vector<PyramidLevel> image_pyramid(const Tensor& image, double scale_factor = 1.2, WindowSize min_size = {});

struct Window {
  BBox box;  // level pixels
  Tensor pixels;
};

/// Every fully contained window at the given stride, row-major.
std::vector<Window> sliding_windows(const Tensor& level, WindowSize window = {}, std::size_t stride = 16);

/// Scans the pyramid with the pedestrian classifier, keeps windows whose
/// positive score exceeds score_floor, maps them to source coordinates and
/// suppresses overlaps. Sorted by descending score.
std::vector<Detection> detect(const ModelWeights& weights, const Tensor& image, const DetectorParams& params = {});

/// Highest detection score, or 0 when nothing was detected.
double frame_score(std::span<const Detection> detections);

double iou(const BBox& a, const BBox& b);

/// Greedy NMS: keep the best remaining detection (earlier index on equal
/// scores), drop everything overlapping it by more than iou_threshold, repeat.
std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold);

struct PRPoint {
  double threshold = 0.0;
  std::optional<double> precision;
  double recall = 0.0;
};

struct ImageDetections {
  std::string image;
  std::vector<Detection> detections;
};

struct ImageTruth {
  std::string image;
  std::vector<BBox> boxes;
};

struct ApResult {
  double ap = 0.0;
  std::vector<PRPoint> curve;  // one point per distinct score, descending threshold
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t ground_truth = 0;
};

// All-points interpolated average precision. Detections are ranked by score
// across all images (input order on ties); each one claims the unmatched
// ground-truth box of its image with the highest IoU when that IoU reaches
// match_iou, otherwise it is a false positive. With no ground truth at all
// the AP is 0.
ApResult average_precision(std::span<const ImageDetections> detections, std::span<const ImageTruth> truth,
                           double match_iou = 0.5);

// JSON-lines records: {"image": name, "boxes": [{"x","y","w","h","score"}]}.
// Ground-truth files use the same schema without scores.
std::string detections_jsonl(std::span<const ImageDetections> detections);
std::vector<ImageTruth> parse_ground_truth_jsonl(const std::string& text);
std::vector<ImageTruth> read_ground_truth(const std::filesystem::path& path);
std::string ground_truth_jsonl(std::span<const ImageTruth> truth);

/// "threshold,precision,recall" with an empty precision field when undefined.
std::string pr_curve_csv(std::span<const PRPoint> curve);

}  // namespace pecas
