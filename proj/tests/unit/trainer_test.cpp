#include <doctest.h>

#include <algorithm>

#include "../support/test_util.hpp"
#include "pecas/errors.hpp"
#include "pecas/fixtures.hpp"
#include "pecas/trainer.hpp"

using namespace pecas;

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(validate_config(c));
  c.batch_size = 0;
  CHECK_THROWS_AS(validate_config(c), ArgumentError);
  c = {};
  c.initial_lr = 0.0;
  CHECK_THROWS_AS(validate_config(c), ArgumentError);
  c = {};
  c.lr_drop_factor = 1.0;
  CHECK_THROWS_AS(validate_config(c), ArgumentError);
  c = {};
  c.epochs = 0;
  CHECK_THROWS_AS(validate_config(c), ArgumentError);
}

TEST_CASE("epoch log line") {
  CHECK(format_epoch_line({3, 0.5, 0.75, 0.8, 0.01, false}) == "3\t0.500000\t0.7500\t0.8000\t0.01");
  CHECK(format_epoch_line({12, 1.25, 1.0, 0.0, 1e-5, true}) == "12\t1.250000\t1.0000\t0.0000\t1e-05");
}

TEST_CASE("adaptive learning rate") {
  TrainConfig c;
  c.dip_threshold = 0.25;
  c.lr_drop_factor = 0.5;
  auto rec = [](double val) { return EpochRecord{1, 0.0, 0.0, val, 0.0, false}; };

  CHECK_FALSE(adaptive_lr({}, 0.1, c).rollback);
  const std::vector<EpochRecord> at_boundary{rec(1.0), rec(0.75)};
  CHECK_FALSE(adaptive_lr(at_boundary, 0.1, c).rollback);
  CHECK(adaptive_lr(at_boundary, 0.1, c).lr == 0.1);

  const std::vector<EpochRecord> dip{rec(0.5), rec(1.0), rec(0.5)};
  const LrDecision d = adaptive_lr(dip, 0.1, c);
  CHECK(d.rollback);
  CHECK(d.lr == 0.05);

  const std::vector<EpochRecord> rising{rec(0.5), rec(0.6), rec(0.7)};
  CHECK_FALSE(adaptive_lr(rising, 0.1, c).rollback);
}

TEST_CASE("confusion matrix and precision/recall") {
  const std::vector<std::size_t> labels{1, 1, 0, 0, 1};
  const std::vector<std::size_t> preds{1, 0, 1, 0, 1};
  const ConfusionMatrix cm = confusion_from(labels, preds);
  CHECK(cm == ConfusionMatrix{2, 1, 1, 1});
  const PrecisionRecall pr = precision_recall(cm);
  CHECK(*pr.precision == doctest::Approx(2.0 / 3.0));
  CHECK(*pr.recall == doctest::Approx(2.0 / 3.0));

  const PrecisionRecall none = precision_recall(ConfusionMatrix{0, 0, 3, 2});
  CHECK_FALSE(none.precision.has_value());
  CHECK(*none.recall == 0.0);
  CHECK_FALSE(precision_recall(ConfusionMatrix{0, 0, 0, 4}).recall.has_value());
  CHECK_THROWS_AS(confusion_from(labels, std::vector<std::size_t>{1}), DimensionError);
}

namespace {

DatasetSplit small_eye_split(std::uint64_t seed) {
  Rng rng(seed);
  DatasetSplit s;
  auto fill = [&](std::vector<LabeledImage>& out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool open = i % 2 == 0;
      out.push_back({fixtures::render_eye_patch(open, 24, rng), open ? kPositiveClass : kNegativeClass, ""});
    }
  };
  fill(s.train, 40);
  fill(s.validation, 10);
  fill(s.test, 10);
  return s;
}

}  // namespace

TEST_CASE("training is deterministic and keeps the best checkpoint") {
  const DatasetSplit split = small_eye_split(1);
  TrainConfig c;
  c.epochs = 6;
  c.batch_size = 7;  // leaves a partial final batch
  std::vector<EpochRecord> seen;
  const TrainResult a = train(build_eye_net(), split, c, [&](const EpochRecord& r) { seen.push_back(r); });
  const TrainResult b = train(build_eye_net(), split, c);

  CHECK(a.weights == b.weights);
  CHECK(a.records == b.records);
  CHECK(seen == a.records);
  REQUIRE(a.records.size() == 6);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].epoch == i + 1);
    CHECK(a.records[i].lr_in_effect > 0.0);
  }
  double best = 0.0;
  for (const auto& r : a.records) best = std::max(best, r.val_accuracy);
  CHECK(a.best_val_accuracy >= best);
  if (a.best_epoch > 0) {
    CHECK(a.records[a.best_epoch - 1].val_accuracy == a.best_val_accuracy);
    CHECK(evaluate(a.weights, InMemorySamples(split.validation)).accuracy == a.best_val_accuracy);
  }

  c.seed = 2;
  CHECK_FALSE(train(build_eye_net(), split, c).weights == a.weights);
}

TEST_CASE("learning rate only changes on a rollback") {
  const DatasetSplit split = small_eye_split(3);
  TrainConfig c;
  c.epochs = 10;
  c.initial_lr = 0.3;
  const TrainResult r = train(build_eye_net(), split, c);
  std::size_t drops = 0;
  for (std::size_t i = 1; i < r.records.size(); ++i) {
    const double ratio = r.records[i].lr_in_effect / r.records[i - 1].lr_in_effect;
    if (r.records[i - 1].rolled_back) {
      CHECK(ratio == doctest::Approx(c.lr_drop_factor));
      ++drops;
    } else {
      CHECK(ratio == 1.0);
    }
  }
  CHECK(drops + (r.records.back().rolled_back ? 1 : 0) == r.rollbacks);
}

TEST_CASE("divergence raises NumericError") {
  const DatasetSplit split = small_eye_split(5);
  TrainConfig c;
  c.epochs = 5;
  c.initial_lr = 1e300;
  CHECK_THROWS_AS(train(build_eye_net(), split, c), NumericError);
}

TEST_CASE("evaluation") {
  const DatasetSplit split = small_eye_split(4);
  const Evaluation e = evaluate(zero_weights(build_eye_net()), InMemorySamples(split.test));
  // Zero weights tie at 0.5/0.5; argmax takes class 0.
  CHECK(e.confusion == ConfusionMatrix{0, 0, 5, 5});
  CHECK(e.accuracy == 0.5);
  CHECK_THROWS_AS(evaluate(zero_weights(build_eye_net()), InMemorySamples({})), ArgumentError);
}
