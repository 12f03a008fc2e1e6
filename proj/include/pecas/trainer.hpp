#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pecas/dataset.hpp"
#include "pecas/model.hpp"

namespace pecas {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double initial_lr = 0.01;
  double lr_drop_factor = 0.1;
  /// Absolute validation-accuracy drop below the best so far that counts as a dip.
  double dip_threshold = 0.15;
  std::uint64_t seed = 42;
};

/// Throws ArgumentError unless epochs >= 1, batch_size >= 1, initial_lr > 0,
/// 0 < lr_drop_factor < 1 and dip_threshold > 0.
void validate_config(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double lr_in_effect = 0.0;
  bool rolled_back = false;  // the dip rule fired after this epoch

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// "epoch\ttrain_loss\ttrain_acc\tval_acc\tlr", no trailing newline.
std::string format_epoch_line(const EpochRecord& record);

struct LrDecision {
  double lr = 0.0;
  bool rollback = false;
};

/// If the latest validation accuracy is strictly below (best so far -
/// dip_threshold) the rate is multiplied by lr_drop_factor and the caller
/// must restore the best checkpoint. Otherwise the rate is unchanged.
LrDecision adaptive_lr(std::span<const EpochRecord> records, double current_lr, const TrainConfig& config);

struct TrainResult {
  ModelWeights weights;  // best-validation checkpoint
  std::vector<EpochRecord> records;
  std::size_t best_epoch = 0;  // 0 means the initial weights were never beaten
  double best_val_accuracy = 0.0;
  std::size_t rollbacks = 0;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

// Mini-batch SGD on softmax cross-entropy. Each epoch reshuffles the training
// set, averages gradients over each batch (the final partial batch is kept),
// then scores the validation set and applies adaptive_lr. The training set's
// accuracy is used for checkpointing when the validation set is empty.
TrainResult train(const ModelSpec& spec, const SampleSource& train_set, const SampleSource& val_set,
                  const TrainConfig& config, const EpochObserver& on_epoch = {});

TrainResult train(const ModelSpec& spec, const DatasetSplit& split, const TrainConfig& config,
                  const EpochObserver& on_epoch = {});

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Labels and predictions are class indices, 1 = positive.
ConfusionMatrix confusion_from(std::span<const std::size_t> labels, std::span<const std::size_t> predictions);

struct Evaluation {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

/// Predicted class is the argmax of the softmax scores. Throws ArgumentError
/// on an empty set.
Evaluation evaluate(const ModelWeights& weights, const SampleSource& samples);

/// nullopt means the metric is undefined (zero denominator).
struct PrecisionRecall {
  std::optional<double> precision;
  std::optional<double> recall;
};

PrecisionRecall precision_recall(const ConfusionMatrix& cm);

}  // namespace pecas
