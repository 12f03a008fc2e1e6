#include "pecas/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "pecas/detector.hpp"
#include "pecas/errors.hpp"
#include "pecas/image.hpp"

namespace fs = std::filesystem;

namespace pecas::fixtures {

namespace {

constexpr double kWindowH = 128.0;
constexpr double kWindowW = 64.0;

struct Part {
  double u0, u1, v0, v1;
};

// Silhouette in window-normalised coordinates (u across, v down).
constexpr Part kParts[] = {
    {0.30, 0.70, 0.19, 0.56},  // torso
    {0.18, 0.28, 0.21, 0.50},  // left arm
    {0.72, 0.82, 0.21, 0.50},  // right arm
    {0.33, 0.47, 0.56, 0.94},  // left leg
    {0.53, 0.67, 0.56, 0.94},  // right leg
};

bool in_silhouette(double u, double v) {
  const double hu = (u - 0.5) / 0.14;
  const double hv = (v - 0.11) / 0.075;
  if (hu * hu + hv * hv <= 1.0) return true;
  for (const Part& p : kParts) {
    if (u >= p.u0 && u < p.u1 && v >= p.v0 && v < p.v1) return true;
  }
  return false;
}

void fill_rect(Tensor& img, double x, double y, double w, double h, double value) {
  const auto H = static_cast<long>(img.dim(1));
  const auto W = static_cast<long>(img.dim(2));
  const long x0 = std::max(0L, std::lround(x)), x1 = std::min(W, std::lround(x + w));
  const long y0 = std::max(0L, std::lround(y)), y1 = std::min(H, std::lround(y + h));
  for (long r = y0; r < y1; ++r) {
    for (long c = x0; c < x1; ++c) img[static_cast<std::size_t>(r * W + c)] = value;
  }
}

void clamp_unit(Tensor& img) {
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
}

std::string numbered(const char* prefix, std::size_t i, const char* ext = ".pgm") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu%s", prefix, i, ext);
  return buf;
}

void write_counts(const fs::path& dir, Counts counts, Rng rng, const char* prefix,
                  Tensor (*render)(bool, Rng&)) {
  fs::create_directories(dir / "pos");
  fs::create_directories(dir / "neg");
  for (std::size_t i = 0; i < counts.pos; ++i) write_pgm(render(true, rng), dir / "pos" / numbered(prefix, i));
  for (std::size_t i = 0; i < counts.neg; ++i) write_pgm(render(false, rng), dir / "neg" / numbered(prefix, i));
}

Tensor eye24(bool open, Rng& rng) { return render_eye_patch(open, 24, rng); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

Tensor render_eye_patch(bool open, std::size_t size, Rng& rng) {
  const double base = rng.uniform(0.55, 0.8);
  const double cu = 0.5 + rng.uniform(-0.1, 0.1);
  const double cv = 0.5 + rng.uniform(-0.1, 0.1);
  const double half_len = rng.uniform(0.25, 0.4);
  const double half_thick = rng.uniform(0.07, 0.11);
  const double bar = base - rng.uniform(0.4, 0.55);
  const double n = static_cast<double>(size);

  Tensor img({1, size, size});
  for (std::size_t i = 0; i < size; ++i) {
    const double v = (static_cast<double>(i) + 0.5) / n;
    for (std::size_t j = 0; j < size; ++j) {
      const double u = (static_cast<double>(j) + 0.5) / n;
      const double across = open ? std::abs(u - cu) : std::abs(v - cv);
      const double along = open ? std::abs(v - cv) : std::abs(u - cu);
      const double value = (across <= half_thick && along <= half_len) ? bar : base;
      img[i * size + j] = value + rng.uniform(-0.05, 0.05);
    }
  }
  clamp_unit(img);
  return img;
}

Tensor render_background(std::size_t height, std::size_t width, Rng& rng) {
  const double base = rng.uniform(0.15, 0.45);
  Tensor img({1, height, width});
  for (double& v : img.data()) v = base + rng.uniform(-0.06, 0.06);
  const auto clutter = rng.below(4);
  for (std::uint64_t k = 0; k < clutter; ++k) {
    const double w = rng.uniform(4, 40), h = rng.uniform(4, 40);
    fill_rect(img, rng.uniform(-10, static_cast<double>(width)), rng.uniform(-10, static_cast<double>(height)), w, h,
              rng.uniform(0.05, 0.6));
  }
  clamp_unit(img);
  return img;
}

void plant_pedestrian(Tensor& image, double x, double y, double scale, double intensity) {
  const auto H = static_cast<long>(image.dim(1));
  const auto W = static_cast<long>(image.dim(2));
  const double bw = kWindowW * scale, bh = kWindowH * scale;
  const long c0 = std::max(0L, static_cast<long>(std::floor(x)));
  const long c1 = std::min(W, static_cast<long>(std::ceil(x + bw)));
  const long r0 = std::max(0L, static_cast<long>(std::floor(y)));
  const long r1 = std::min(H, static_cast<long>(std::ceil(y + bh)));
  for (long r = r0; r < r1; ++r) {
    const double v = (static_cast<double>(r) + 0.5 - y) / bh;
    for (long c = c0; c < c1; ++c) {
      const double u = (static_cast<double>(c) + 0.5 - x) / bw;
      if (u >= 0.0 && u < 1.0 && v >= 0.0 && v < 1.0 && in_silhouette(u, v)) {
        image[static_cast<std::size_t>(r * W + c)] = intensity;
      }
    }
  }
}

Tensor render_pedestrian_window(bool positive, Rng& rng) {
  Tensor img = render_background(128, 64, rng);
  const double intensity = rng.uniform(0.7, 0.95);
  auto plant_centred = [&](double scale, double dx, double dy) {
    plant_pedestrian(img, (kWindowW - kWindowW * scale) / 2 + dx, (kWindowH - kWindowH * scale) / 2 + dy, scale,
                     intensity);
  };
  auto signed_between = [&](double lo, double hi) { return (rng.below(2) ? 1.0 : -1.0) * rng.uniform(lo, hi); };

  if (positive) {
    plant_centred(rng.uniform(0.95, 1.05), rng.uniform(-3, 3), rng.uniform(-3, 3));
    return img;
  }
  switch (rng.below(5)) {
    case 0:
      if (rng.below(5) == 0) {
        for (double& v : img.data()) v = rng.below(2) ? 0.0 : rng.uniform(0.0, 1.0);
      }
      break;
    case 1:  // off-centre sideways
      plant_centred(rng.uniform(0.95, 1.05), signed_between(12, 60), rng.uniform(-40, 40));
      break;
    case 2:  // off-centre vertically
      plant_centred(rng.uniform(0.95, 1.05), rng.uniform(-8, 8), signed_between(40, 110));
      break;
    case 3:  // too small for this scale
      plant_centred(rng.uniform(0.55, 0.87), rng.uniform(-20, 20), rng.uniform(-30, 30));
      break;
    default: {  // poles and blobs
      const auto poles = 1 + rng.below(3);
      for (std::uint64_t k = 0; k < poles; ++k) {
        fill_rect(img, rng.uniform(0, 56), rng.uniform(-20, 60), rng.uniform(6, 24), rng.uniform(60, 128),
                  rng.uniform(0.6, 0.95));
      }
      break;
    }
  }
  clamp_unit(img);
  return img;
}

PlantedFrame render_outward_frame(bool with_pedestrian, Rng& rng) {
  PlantedFrame f{render_background(kOutwardHeight, kOutwardWidth, rng), {}};
  if (with_pedestrian) {
    const double x = 16.0 * static_cast<double>(rng.below((kOutwardWidth - 64) / 16 + 1));
    const double y = 16.0 * static_cast<double>(rng.below((kOutwardHeight - 128) / 16 + 1));
    plant_pedestrian(f.image, x, y, 1.0, rng.uniform(0.7, 0.95));
    f.plants.push_back({x, y, kWindowW, kWindowH});
  }
  return f;
}

Tensor render_driver_frame(bool eyes_open, Rng& rng) {
  Tensor img({1, kDriverSize, kDriverSize});
  const double skin = rng.uniform(0.5, 0.65);
  for (double& v : img.data()) v = skin + rng.uniform(-0.04, 0.04);
  fill_rect(img, 30, 80, 36, 6, skin - 0.3);  // mouth
  const Tensor eyes = render_eye_patch(eyes_open, static_cast<std::size_t>(kDriverEyeRect.w), rng);
  const auto ex = static_cast<std::size_t>(kDriverEyeRect.x), ey = static_cast<std::size_t>(kDriverEyeRect.y);
  const std::size_t es = eyes.dim(1);
  for (std::size_t r = 0; r < es; ++r) {
    for (std::size_t c = 0; c < es; ++c) img[(ey + r) * kDriverSize + ex + c] = eyes[r * es + c];
  }
  clamp_unit(img);
  return img;
}

void write_fixtures(const fs::path& root, std::uint64_t seed, const FixtureSizes& sizes) {
  Rng master(seed);

  write_counts(root / "eye" / "train", sizes.eye_train, master.fork(1), "eye", eye24);
  write_counts(root / "eye" / "val", sizes.eye_val, master.fork(2), "eye", eye24);
  write_counts(root / "eye" / "test", sizes.eye_test, master.fork(3), "eye", eye24);
  write_counts(root / "pedestrian" / "train", sizes.ped_train, master.fork(4), "ped", render_pedestrian_window);
  write_counts(root / "pedestrian" / "val", sizes.ped_val, master.fork(5), "ped", render_pedestrian_window);
  write_counts(root / "pedestrian" / "test", sizes.ped_test, master.fork(6), "ped", render_pedestrian_window);

  {
    Rng rng = master.fork(7);
    const fs::path frames = root / "detect" / "frames";
    fs::create_directories(frames);
    std::vector<ImageTruth> truth;
    for (std::size_t i = 0; i < sizes.detect_frames; ++i) {
      PlantedFrame f = render_outward_frame(true, rng);
      const std::string name = numbered("frame", i);
      write_pgm(f.image, frames / name);
      truth.push_back({name, f.plants});
    }
    write_text(root / "detect" / "ground_truth.jsonl", ground_truth_jsonl(truth));
  }

  {
    Rng rng = master.fork(8);
    const fs::path stream = root / "stream";
    for (const char* sub : {"outward", "driver", "driver_open"}) fs::create_directories(stream / sub);
    std::string roi;
    for (std::size_t i = 0; i < sizes.stream_frames; ++i) {
      const std::string name = numbered("frame", i);
      const bool walking = i >= kStreamWalkFrom && i < kStreamWalkTo;
      write_pgm(render_outward_frame(walking, rng).image, stream / "outward" / name);
      write_pgm(render_driver_frame(i < kStreamClosedFrom, rng), stream / "driver" / name);
      write_pgm(render_driver_frame(true, rng), stream / "driver_open" / name);
      roi += nlohmann::ordered_json{{"sequence", i},
                                    {"x", kDriverEyeRect.x},
                                    {"y", kDriverEyeRect.y},
                                    {"w", kDriverEyeRect.w},
                                    {"h", kDriverEyeRect.h}}
                 .dump() +
             "\n";
    }
    write_text(stream / "roi.jsonl", roi);
  }
}

}  // namespace pecas::fixtures
