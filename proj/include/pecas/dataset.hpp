#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pecas/errors.hpp"
#include "pecas/rng.hpp"
#include "pecas/tensor.hpp"

namespace pecas {

struct LabeledImage {
  Tensor pixels;  // [1,H,W] in [0,1]
  std::size_t label = 0;
  std::string source_path;
};

/// A file found under pos/ or neg/, not yet decoded.
struct DatasetEntry {
  std::filesystem::path path;
  std::size_t label = 0;
};

using WarningSink = std::function<void(const std::string&)>;

/// Writes the message as one line on standard error.
void warn_to_stderr(const std::string& message);

/// Lists <root>/pos/*.{pgm,ppm,png} (label 1) followed by <root>/neg/* (label
/// 0), each sorted by file name. Throws LayoutError if either directory is missing.
std::vector<DatasetEntry> scan_dataset_dir(const std::filesystem::path& root);

/// Decodes and resizes every scanned file. Undecodable files are reported to
/// `warn` and skipped.
std::vector<LabeledImage> load_dataset_dir(const std::filesystem::path& root, std::size_t height, std::size_t width,
                                           const WarningSink& warn = warn_to_stderr);

template <class T>
struct Split {
  std::vector<T> train;
  std::vector<T> validation;
  std::vector<T> test;
  std::uint64_t seed = 0;
};

using DatasetSplit = Split<LabeledImage>;

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// floor(0.6 N) / floor(0.2 N) / remainder.
constexpr SplitSizes split_sizes(std::size_t n) noexcept {
  const std::size_t train = n * 6 / 10;
  const std::size_t validation = n * 2 / 10;
  return {train, validation, n - train - validation};
}

/// Seeded Fisher-Yates shuffle followed by contiguous 0.6/0.2/0.2 slicing.
/// Throws ArgumentError for fewer than 5 items.
template <class T>
Split<T> split_dataset(std::vector<T> items, std::uint64_t seed) {
  if (items.size() < 5) {
    throw ArgumentError("split_dataset: need at least 5 items, got " + std::to_string(items.size()));
  }
  Rng rng(seed);
  shuffle(std::span<T>(items), rng);
  const SplitSizes sizes = split_sizes(items.size());
  Split<T> out;
  out.seed = seed;
  auto first = std::make_move_iterator(items.begin());
  out.train.assign(first, first + static_cast<std::ptrdiff_t>(sizes.train));
  first += static_cast<std::ptrdiff_t>(sizes.train);
  out.validation.assign(first, first + static_cast<std::ptrdiff_t>(sizes.validation));
  first += static_cast<std::ptrdiff_t>(sizes.validation);
  out.test.assign(first, std::make_move_iterator(items.end()));
  return out;
}

/// True when root holds train/, val/ and test/ subdirectories.
bool has_predefined_split(const std::filesystem::path& root);

/// Loads root/{train,val,test} as a fixed split when present; otherwise
/// loads root as one dataset and splits it with `seed`.
DatasetSplit load_split(const std::filesystem::path& root, std::size_t height, std::size_t width, std::uint64_t seed,
                        const WarningSink& warn = warn_to_stderr);

Split<DatasetEntry> scan_split(const std::filesystem::path& root, std::uint64_t seed);

/// Indexed access to labelled images. Implementations either hold the pixels
/// or decode them on demand, so training never needs the whole corpus resident.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t label(std::size_t i) const = 0;
  virtual Tensor image(std::size_t i) const = 0;
};

class InMemorySamples final : public SampleSource {
 public:
  explicit InMemorySamples(std::span<const LabeledImage> images) : images_(images) {}
  std::size_t size() const override { return images_.size(); }
  std::size_t label(std::size_t i) const override { return images_[i].label; }
  Tensor image(std::size_t i) const override { return images_[i].pixels; }

 private:
  std::span<const LabeledImage> images_;
};

/// Decodes and resizes each file when it is requested.
class FileSamples final : public SampleSource {
 public:
  FileSamples(std::vector<DatasetEntry> entries, std::size_t height, std::size_t width)
      : entries_(std::move(entries)), height_(height), width_(width) {}
  std::size_t size() const override { return entries_.size(); }
  std::size_t label(std::size_t i) const override { return entries_[i].label; }
  Tensor image(std::size_t i) const override;

 private:
  std::vector<DatasetEntry> entries_;
  std::size_t height_;
  std::size_t width_;
};

}  // namespace pecas
