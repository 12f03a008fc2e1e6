#include "pecas/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pecas/errors.hpp"
#include "pecas/layers.hpp"
#include "pecas/rng.hpp"

namespace pecas {

void validate_config(const TrainConfig& c) {
  if (c.epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (c.batch_size < 1) throw ArgumentError("batch size must be >= 1");
  if (!(c.initial_lr > 0.0) || !std::isfinite(c.initial_lr)) throw ArgumentError("initial learning rate must be > 0");
  if (!(c.lr_drop_factor > 0.0 && c.lr_drop_factor < 1.0)) throw ArgumentError("lr drop factor must be in (0, 1)");
  if (!(c.dip_threshold > 0.0)) throw ArgumentError("dip threshold must be > 0");
}

std::string format_epoch_line(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.4f\t%.4f\t%.6g", r.epoch, r.train_loss, r.train_accuracy,
                r.val_accuracy, r.lr_in_effect);
  return buf;
}

LrDecision adaptive_lr(std::span<const EpochRecord> records, double current_lr, const TrainConfig& config) {
  if (records.empty()) return {current_lr, false};
  double best = records.front().val_accuracy;
  for (const auto& r : records) best = std::max(best, r.val_accuracy);
  if (records.back().val_accuracy < best - config.dip_threshold) {
    return {current_lr * config.lr_drop_factor, true};
  }
  return {current_lr, false};
}

ConfusionMatrix confusion_from(std::span<const std::size_t> labels, std::span<const std::size_t> predictions) {
  if (labels.size() != predictions.size()) throw DimensionError("confusion_from: label/prediction count mismatch");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] == kPositiveClass;
    const bool predicted = predictions[i] == kPositiveClass;
    if (actual && predicted) {
      ++cm.tp;
    } else if (!actual && predicted) {
      ++cm.fp;
    } else if (actual) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

namespace {

std::size_t argmax(const Tensor& scores) {
  return static_cast<std::size_t>(std::max_element(scores.data().begin(), scores.data().end()) -
                                  scores.data().begin());
}

void check_shapes(const ModelSpec& spec, const SampleSource& samples, const char* which) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor img = samples.image(i);
    if (img.shape() != spec.input_shape) {
      throw DimensionError(std::string(which) + " sample " + std::to_string(i) + " has shape " +
                           shape_string(img.shape()) + ", model '" + spec.name + "' expects " +
                           shape_string(spec.input_shape));
    }
  }
}

}  // namespace

Evaluation evaluate(const ModelWeights& weights, const SampleSource& samples) {
  if (samples.size() == 0) throw ArgumentError("evaluate: empty sample set");
  std::vector<std::size_t> labels(samples.size()), predictions(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    labels[i] = samples.label(i);
    predictions[i] = argmax(predict(weights, samples.image(i)));
  }
  Evaluation ev;
  ev.confusion = confusion_from(labels, predictions);
  ev.accuracy = static_cast<double>(ev.confusion.tp + ev.confusion.tn) / static_cast<double>(samples.size());
  return ev;
}

PrecisionRecall precision_recall(const ConfusionMatrix& cm) {
  PrecisionRecall pr;
  if (cm.tp + cm.fp > 0) pr.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  if (cm.tp + cm.fn > 0) pr.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  return pr;
}

TrainResult train(const ModelSpec& spec, const SampleSource& train_set, const SampleSource& val_set,
                  const TrainConfig& config, const EpochObserver& on_epoch) {
  validate_config(config);
  if (train_set.size() == 0) throw ArgumentError("train: empty training set");
  check_shapes(spec, train_set, "training");
  check_shapes(spec, val_set, "validation");
  const SampleSource& checkpoint_set = val_set.size() > 0 ? val_set : train_set;

  ModelWeights weights = init_weights(spec, config.seed);
  Rng shuffle_rng = Rng(config.seed).fork(1);

  TrainResult result;
  result.weights = weights;
  result.best_val_accuracy = evaluate(weights, checkpoint_set).accuracy;
  double lr = config.initial_lr;

  std::vector<std::size_t> order(train_set.size());
  std::vector<Tensor> batch_grad;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch_grad.clear();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const std::size_t label = train_set.label(idx);
        SampleGradient g = sample_gradient(weights, train_set.image(idx), label);
        loss_sum += g.loss;
        if (argmax(g.probs) == label) ++correct;
        if (batch_grad.empty()) {
          batch_grad = std::move(g.param_grads);
        } else {
          for (std::size_t p = 0; p < batch_grad.size(); ++p) {
            auto acc = batch_grad[p].data();
            auto add = g.param_grads[p].data();
            for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += add[j];
          }
        }
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (Tensor& t : batch_grad) {
        for (double& v : t.data()) v *= scale;
      }
      sgd_step(weights.params, batch_grad, lr);
    }
    if (!std::isfinite(loss_sum)) {
      throw NumericError("training diverged in epoch " + std::to_string(epoch) + " (lr " + std::to_string(lr) + ")");
    }
    for (const Tensor& t : weights.params) {
      if (!t.all_finite()) throw NumericError("training diverged in epoch " + std::to_string(epoch));
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(order.size());
    record.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    record.val_accuracy = evaluate(weights, checkpoint_set).accuracy;
    record.lr_in_effect = lr;

    if (record.val_accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = record.val_accuracy;
      result.best_epoch = epoch;
      result.weights = weights;
    }

    result.records.push_back(record);
    const LrDecision decision = adaptive_lr(result.records, lr, config);
    if (decision.rollback) {
      result.records.back().rolled_back = true;
      ++result.rollbacks;
      weights = result.weights;
      lr = decision.lr;
    }
    if (on_epoch) on_epoch(result.records.back());
  }
  return result;
}

TrainResult train(const ModelSpec& spec, const DatasetSplit& split, const TrainConfig& config,
                  const EpochObserver& on_epoch) {
  return train(spec, InMemorySamples(split.train), InMemorySamples(split.validation), config, on_epoch);
}

}  // namespace pecas
