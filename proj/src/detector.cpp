#include "pecas/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pecas/errors.hpp"
#include "pecas/image.hpp"

namespace pecas {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<PyramidLevel> image_pyramid(const Tensor& image, double scale_factor, WindowSize min_size) {
  if (!(scale_factor > 1.0)) throw ArgumentError("image_pyramid: scale factor must be > 1");
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw DimensionError("image_pyramid: expected [1,H,W], got " + shape_string(image.shape()));
  }
  const double H = static_cast<double>(image.dim(1));
  const double W = static_cast<double>(image.dim(2));
  std::vector<PyramidLevel> levels;
  for (int k = 0;; ++k) {
    const double scale = std::pow(scale_factor, k);
    const auto h = static_cast<std::size_t>(std::floor(H / scale));
    const auto w = static_cast<std::size_t>(std::floor(W / scale));
    if (h < min_size.height || w < min_size.width) break;
    levels.push_back({scale, k == 0 ? image : resize_bilinear(image, h, w)});
  }
  return levels;
}

std::vector<Window> sliding_windows(const Tensor& level, WindowSize window, std::size_t stride) {
  if (stride < 1) throw ArgumentError("sliding_windows: stride must be >= 1");
  const std::size_t H = level.dim(1), W = level.dim(2);
  std::vector<Window> out;
  if (H < window.height || W < window.width) return out;
  for (std::size_t y = 0; y + window.height <= H; y += stride) {
    for (std::size_t x = 0; x + window.width <= W; x += stride) {
      out.push_back({{static_cast<double>(x), static_cast<double>(y), static_cast<double>(window.width),
                      static_cast<double>(window.height)},
                     crop(level, x, y, window.width, window.height)});
    }
  }
  return out;
}

std::vector<Detection> detect(const ModelWeights& weights, const Tensor& image, const DetectorParams& params) {
  require_model(weights, kPedestrianModel);
  const WindowSize window{weights.spec.input_shape[1], weights.spec.input_shape[2]};
  std::vector<Detection> candidates;
  for (const PyramidLevel& level : image_pyramid(image, params.scale_factor, window)) {
    for (const Window& win : sliding_windows(level.image, window, params.stride)) {
      const double score = predict(weights, win.pixels)[kPositiveClass];
      if (score > params.score_floor) {
        candidates.push_back({{win.box.x * level.scale, win.box.y * level.scale, win.box.w * level.scale,
                               win.box.h * level.scale},
                              score});
      }
    }
  }
  return nms(candidates, params.nms_iou);
}

double frame_score(std::span<const Detection> detections) {
  double best = 0.0;
  for (const auto& d : detections) best = std::max(best, d.score);
  return best;
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detections[a].score > detections[b].score; });
  std::vector<Detection> kept;
  std::vector<bool> removed(detections.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (removed[i]) continue;
    const Detection& best = detections[order[i]];
    kept.push_back(best);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (!removed[j] && iou(best.box, detections[order[j]].box) > iou_threshold) removed[j] = true;
    }
  }
  return kept;
}

ApResult average_precision(std::span<const ImageDetections> detections, std::span<const ImageTruth> truth,
                           double match_iou) {
  std::map<std::string, std::size_t> truth_index;
  std::vector<std::vector<bool>> matched(truth.size());
  ApResult result;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    truth_index.emplace(truth[i].image, i);
    matched[i].assign(truth[i].boxes.size(), false);
    result.ground_truth += truth[i].boxes.size();
  }

  struct Ranked {
    double score;
    std::size_t image;
    std::size_t det;
  };
  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (std::size_t j = 0; j < detections[i].detections.size(); ++j) {
      ranked.push_back({detections[i].detections[j].score, i, j});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<bool> is_tp(ranked.size(), false);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const ImageDetections& img = detections[ranked[r].image];
    const auto it = truth_index.find(img.image);
    if (it == truth_index.end()) continue;
    const ImageTruth& gt = truth[it->second];
    const BBox& box = img.detections[ranked[r].det].box;
    double best_iou = -1.0;
    std::size_t best = 0;
    for (std::size_t g = 0; g < gt.boxes.size(); ++g) {
      if (matched[it->second][g]) continue;
      const double o = iou(box, gt.boxes[g]);
      if (o > best_iou) {
        best_iou = o;
        best = g;
      }
    }
    if (best_iou >= match_iou) {
      matched[it->second][best] = true;
      is_tp[r] = true;
    }
  }

  const double n_gt = static_cast<double>(result.ground_truth);
  std::vector<double> precision(ranked.size());
  std::size_t tp = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (is_tp[r]) ++tp;
    precision[r] = static_cast<double>(tp) / static_cast<double>(r + 1);
    const bool last_at_score = r + 1 == ranked.size() || ranked[r + 1].score != ranked[r].score;
    if (last_at_score) {
      result.curve.push_back({ranked[r].score, precision[r], n_gt > 0 ? static_cast<double>(tp) / n_gt : 0.0});
    }
  }
  result.true_positives = tp;
  result.false_positives = ranked.size() - tp;

  if (result.ground_truth == 0) return result;
  // Precision envelope: best precision at this rank or any later one.
  for (std::size_t r = ranked.size(); r-- > 1;) precision[r - 1] = std::max(precision[r - 1], precision[r]);
  // Summed before dividing so that a perfect ranking gives exactly 1.
  double sum = 0.0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (is_tp[r]) sum += precision[r];
  }
  result.ap = sum / n_gt;
  return result;
}

namespace {

ordered_json box_json(const BBox& b) { return ordered_json{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}}; }

}  // namespace

std::string detections_jsonl(std::span<const ImageDetections> detections) {
  std::string out;
  for (const auto& img : detections) {
    ordered_json boxes = ordered_json::array();
    for (const auto& d : img.detections) {
      ordered_json b = box_json(d.box);
      b["score"] = d.score;
      boxes.push_back(std::move(b));
    }
    out += ordered_json{{"image", img.image}, {"boxes", std::move(boxes)}}.dump();
    out += '\n';
  }
  return out;
}

std::string ground_truth_jsonl(std::span<const ImageTruth> truth) {
  std::string out;
  for (const auto& img : truth) {
    ordered_json boxes = ordered_json::array();
    for (const auto& b : img.boxes) boxes.push_back(box_json(b));
    out += ordered_json{{"image", img.image}, {"boxes", std::move(boxes)}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<ImageTruth> parse_ground_truth_jsonl(const std::string& text) {
  std::vector<ImageTruth> truth;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      ImageTruth t;
      t.image = rec.at("image").get<std::string>();
      for (const auto& b : rec.at("boxes")) {
        t.boxes.push_back({b.at("x").get<double>(), b.at("y").get<double>(), b.at("w").get<double>(),
                           b.at("h").get<double>()});
      }
      truth.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw ConfigError("ground truth line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return truth;
}

std::vector<ImageTruth> read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ground-truth file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_ground_truth_jsonl(text.str());
}

std::string pr_curve_csv(std::span<const PRPoint> curve) {
  std::ostringstream out;
  out.precision(17);
  out << "threshold,precision,recall\n";
  for (const auto& p : curve) {
    out << p.threshold << ',';
    if (p.precision) out << *p.precision;
    out << ',' << p.recall << '\n';
  }
  return out.str();
}

}  // namespace pecas
