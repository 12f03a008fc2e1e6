#include "pecas/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>

#include "pecas/image.hpp"

namespace fs = std::filesystem;

namespace pecas {

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm" || ext == ".ppm" || ext == ".png";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

Tensor load_resized(const fs::path& path, std::size_t height, std::size_t width) {
  return resize_bilinear(read_image(path), height, width);
}

}  // namespace

void warn_to_stderr(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::vector<DatasetEntry> scan_dataset_dir(const fs::path& root) {
  std::vector<DatasetEntry> entries;
  for (const auto& [sub, label] : {std::pair{"pos", std::size_t{1}}, std::pair{"neg", std::size_t{0}}}) {
    const fs::path dir = root / sub;
    if (!fs::is_directory(dir)) {
      throw LayoutError("dataset '" + root.string() + "' has no " + sub + "/ subdirectory");
    }
    for (auto& file : sorted_images(dir)) entries.push_back({std::move(file), label});
  }
  return entries;
}

std::vector<LabeledImage> load_dataset_dir(const fs::path& root, std::size_t height, std::size_t width,
                                           const WarningSink& warn) {
  std::vector<LabeledImage> images;
  for (const DatasetEntry& entry : scan_dataset_dir(root)) {
    try {
      images.push_back({load_resized(entry.path, height, width), entry.label, entry.path.string()});
    } catch (const DecodeError& e) {
      warn("skipping undecodable file " + entry.path.string() + " (" + e.what() + ")");
    }
  }
  return images;
}

bool has_predefined_split(const fs::path& root) {
  return fs::is_directory(root / "train") && fs::is_directory(root / "val") && fs::is_directory(root / "test");
}

DatasetSplit load_split(const fs::path& root, std::size_t height, std::size_t width, std::uint64_t seed,
                        const WarningSink& warn) {
  if (has_predefined_split(root)) {
    DatasetSplit split;
    split.seed = seed;
    split.train = load_dataset_dir(root / "train", height, width, warn);
    split.validation = load_dataset_dir(root / "val", height, width, warn);
    split.test = load_dataset_dir(root / "test", height, width, warn);
    return split;
  }
  return split_dataset(load_dataset_dir(root, height, width, warn), seed);
}

Split<DatasetEntry> scan_split(const fs::path& root, std::uint64_t seed) {
  if (has_predefined_split(root)) {
    return {scan_dataset_dir(root / "train"), scan_dataset_dir(root / "val"), scan_dataset_dir(root / "test"), seed};
  }
  return split_dataset(scan_dataset_dir(root), seed);
}

Tensor FileSamples::image(std::size_t i) const { return load_resized(entries_[i].path, height_, width_); }

}  // namespace pecas
