// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   pecas_acceptance --fixture DIR --golden FILE
//
// DIR is the output of pecas_fixtures plus models/{eye,pedestrian}.pecas
// trained by the CLI with default settings.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "../support/gen.hpp"
#include "../support/oracles.hpp"
#include "../support/test_util.hpp"
#include "pecas/cli.hpp"
#include "pecas/dataset.hpp"
#include "pecas/detector.hpp"
#include "pecas/errors.hpp"
#include "pecas/fusion.hpp"
#include "pecas/image.hpp"
#include "pecas/layers.hpp"
#include "pecas/model.hpp"
#include "pecas/model_io.hpp"
#include "pecas/trainer.hpp"

namespace fs = std::filesystem;
using namespace pecas;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

Outcome gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream out, err;
  const int code = cli::dispatch({"gradcheck", "--seeds", "20"}, out, err);
  const double secs = seconds_since(start);
  std::string last;
  std::istringstream lines(out.str());
  for (std::string line; std::getline(lines, line);) last = line;
  return {code == 0 && secs < 30.0, last + " (wall " + fmt(secs) + " s)"};
}

std::vector<Detection> random_boxes(Rng& rng, std::size_t n) {
  std::vector<Detection> d;
  for (std::size_t i = 0; i < n; ++i) {
    d.push_back({{static_cast<double>(rng.below(16)), static_cast<double>(rng.below(16)),
                  static_cast<double>(4 + rng.below(10)), static_cast<double>(4 + rng.below(10))},
                 0.1 * static_cast<double>(1 + rng.below(6))});
  }
  return d;
}

Outcome kernel_oracles() {
  Rng rng(2024);
  std::size_t conv_bad = 0, pool_bad = 0, nms_bad = 0, ap_bad = 0;
  double conv_err = 0.0, pool_err = 0.0;

  for (int t = 0; t < 200; ++t) {
    const std::size_t c = 1 + rng.below(3), f = 1 + rng.below(3), k = 1 + rng.below(4);
    const std::size_t stride = 1 + rng.below(2), pad = rng.below(2);
    const std::size_t h = k + rng.below(7), w = k + rng.below(7);
    const Tensor in = gen::uniform({c, h, w}, rng, -1.0, 1.0);
    const Tensor kern = gen::uniform({f, c, k, k}, rng, -1.0, 1.0);
    const Tensor bias = gen::uniform({f}, rng, -1.0, 1.0);
    const Tensor got = conv2d_forward(in, kern, bias, {stride, pad});
    const Tensor want = oracle::conv2d(in, kern, bias, stride, pad);
    if (got.shape() != want.shape()) {
      ++conv_bad;
      continue;
    }
    for (std::size_t i = 0; i < got.size(); ++i) conv_err = std::max(conv_err, std::abs(got[i] - want[i]));
  }
  for (int t = 0; t < 200; ++t) {
    const Tensor in = gen::coarse({1 + rng.below(3), 2 * (1 + rng.below(5)), 2 * (1 + rng.below(5))}, rng, 4);
    const Tensor got = maxpool2_forward(in);
    const Tensor want = oracle::maxpool2(in);
    if (got.shape() != want.shape()) {
      ++pool_bad;
      continue;
    }
    for (std::size_t i = 0; i < got.size(); ++i) pool_err = std::max(pool_err, std::abs(got[i] - want[i]));
  }
  for (int t = 0; t < 500; ++t) {
    const auto d = random_boxes(rng, rng.below(9));
    const double thr = 0.1 * static_cast<double>(1 + rng.below(8));
    if (nms(d, thr) != oracle::nms(d, thr)) ++nms_bad;
  }
  for (int t = 0; t < 200; ++t) {
    std::vector<ImageTruth> gt;
    std::vector<ImageDetections> dets;
    const std::size_t images = 1 + rng.below(3);
    std::size_t budget = rng.below(11);
    for (std::size_t i = 0; i < images; ++i) {
      const std::string name = "img" + std::to_string(i);
      ImageTruth truth{name, {}};
      for (std::size_t g = rng.below(4); g > 0; --g) {
        truth.boxes.push_back({static_cast<double>(rng.below(20)), static_cast<double>(rng.below(20)), 8, 8});
      }
      ImageDetections d{name, {}};
      const std::size_t here = i + 1 == images ? budget : rng.below(budget + 1);
      budget -= here;
      for (std::size_t k = 0; k < here; ++k) {
        BBox box{static_cast<double>(rng.below(22)), static_cast<double>(rng.below(22)),
                 static_cast<double>(6 + rng.below(5)), static_cast<double>(6 + rng.below(5))};
        if (!truth.boxes.empty() && rng.below(2)) {
          const BBox& g = truth.boxes[rng.below(truth.boxes.size())];
          box = {g.x + static_cast<double>(rng.below(5)) - 2, g.y + static_cast<double>(rng.below(5)) - 2, 8, 8};
        }
        d.detections.push_back({box, 0.1 * static_cast<double>(1 + rng.below(6))});
      }
      gt.push_back(truth);
      dets.push_back(d);
    }
    if (average_precision(dets, gt).ap != oracle::average_precision(dets, gt)) ++ap_bad;
  }
  const bool pass = conv_bad == 0 && pool_bad == 0 && conv_err <= 1e-12 && pool_err <= 1e-12 && nms_bad == 0 &&
                    ap_bad == 0;
  return {pass, "conv max |diff| " + fmt(conv_err) + ", pool max |diff| " + fmt(pool_err) + ", NMS mismatches " +
                    std::to_string(nms_bad) + "/500, AP mismatches " + std::to_string(ap_bad) + "/200"};
}

Outcome fusion_grid() {
  std::size_t ok = 0;
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= 10; ++j) {
      const double p = i / 10.0, d = j / 10.0;
      const AlarmEvent e = fuse(p, d, 0.2);
      if (e.alarm == oracle::grid_alarm(i, j) && e.alarm == (p * d > 0.2)) ++ok;
    }
  }
  return {ok == 121, std::to_string(ok) + "/121 cases"};
}

Outcome split_contract() {
  std::size_t ok = 0, total = 0;
  for (std::size_t n : {5u, 10u, 100u, 21820u}) {
    std::vector<std::size_t> items(n);
    for (std::size_t i = 0; i < n; ++i) items[i] = i;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      ++total;
      const auto s = split_dataset(items, seed);
      std::vector<std::size_t> all = s.train;
      all.insert(all.end(), s.validation.begin(), s.validation.end());
      all.insert(all.end(), s.test.begin(), s.test.end());
      std::sort(all.begin(), all.end());
      const bool partition = all == items;
      const bool sized = s.train.size() == n * 6 / 10 && s.validation.size() == n * 2 / 10 &&
                         s.test.size() == n - n * 6 / 10 - n * 2 / 10;
      if (partition && sized) ++ok;
    }
  }
  const SplitSizes big = split_sizes(21820);
  const bool corpus = big.train == 13092 && big.validation == 4364 && big.test == 4364;
  return {ok == total && corpus, std::to_string(ok) + "/" + std::to_string(total) + " splits; N=21820 gives " +
                                     std::to_string(big.train) + "/" + std::to_string(big.validation) + "/" +
                                     std::to_string(big.test)};
}

// Non-increasing over every 5-epoch window that starts after epoch 5.
bool loss_windows_hold(const std::vector<EpochRecord>& records) {
  for (std::size_t start = 5; start + 4 < records.size(); ++start) {
    if (records[start + 4].train_loss > records[start].train_loss) return false;
  }
  return true;
}

Outcome desk_training(const fs::path& fixture) {
  const auto start = std::chrono::steady_clock::now();
  const ModelSpec spec = build_eye_net();
  const DatasetSplit split = load_split(fixture / "eye", 24, 24, 42);
  const TrainResult r = train(spec, split, TrainConfig{});
  const Evaluation e = evaluate(r.weights, InMemorySamples(split.test));
  const double secs = seconds_since(start);
  const bool sizes = split.train.size() == 200 && split.validation.size() == 50 && split.test.size() == 50;
  const bool windows = loss_windows_hold(r.records);
  return {sizes && e.accuracy >= 0.95 && r.records.size() <= 30 && secs < 120.0 && windows,
          "test accuracy " + fmt(e.accuracy) + " after " + std::to_string(r.records.size()) + " epochs (best epoch " +
              std::to_string(r.best_epoch) + ") in " + fmt(secs) + " s; loss windows " +
              (windows ? "non-increasing" : "violated")};
}

Outcome lr_recovery(const fs::path& fixture) {
  const DatasetSplit split = load_split(fixture / "eye", 24, 24, 42);
  TrainConfig c;
  c.initial_lr = 0.2;  // twenty times the default
  c.epochs = 12;
  const TrainResult r = train(build_eye_net(), split, c);
  const auto dip = std::find_if(r.records.begin(), r.records.end(), [](const EpochRecord& e) { return e.rolled_back; });
  if (dip == r.records.end()) return {false, "no rollback in " + std::to_string(r.records.size()) + " epochs"};
  double pre_dip_best = 0.0;
  for (auto it = r.records.begin(); it != dip; ++it) pre_dip_best = std::max(pre_dip_best, it->val_accuracy);
  const bool dropped = dip + 1 != r.records.end() && (dip + 1)->lr_in_effect == dip->lr_in_effect * 0.1;
  const double final_val = evaluate(r.weights, InMemorySamples(split.validation)).accuracy;
  return {dip->val_accuracy < pre_dip_best && dropped && final_val >= pre_dip_best,
          "dip at epoch " + std::to_string(dip->epoch) + " (val " + fmt(dip->val_accuracy) + " vs best " +
              fmt(pre_dip_best) + "), lr " + fmt(dip->lr_in_effect) + " -> " +
              (dip + 1 != r.records.end() ? fmt((dip + 1)->lr_in_effect) : std::string("n/a")) +
              ", final checkpoint val " + fmt(final_val)};
}

Outcome detector_fixture(const fs::path& fixture) {
  const ModelWeights w = load_model(fixture / "models" / "pedestrian.pecas", kPedestrianModel);
  const auto truth = read_ground_truth(fixture / "detect" / "ground_truth.jsonl");
  std::vector<ImageDetections> all;
  std::size_t plants = 0, matched_once = 0;
  for (const ImageTruth& t : truth) {
    const auto dets = detect(w, read_image(fixture / "detect" / "frames" / t.image));
    for (const BBox& plant : t.boxes) {
      ++plants;
      const auto hits = std::count_if(dets.begin(), dets.end(), [&](const Detection& d) { return iou(d.box, plant) >= 0.5; });
      if (hits == 1) ++matched_once;
    }
    all.push_back({t.image, dets});
  }
  const ApResult ap = average_precision(all, truth);
  return {truth.size() == 20 && plants > 0 && matched_once == plants && ap.ap == 1.0,
          std::to_string(matched_once) + "/" + std::to_string(plants) + " plants with exactly one detection over " +
              std::to_string(truth.size()) + " frames; AP " + fmt(ap.ap) + " (" + std::to_string(ap.false_positives) +
              " FP)"};
}

Outcome golden_run(const fs::path& fixture, const fs::path& golden) {
  testutil::TempDir dir("acceptance");
  const fs::path log = dir.path() / "alarms.jsonl";
  std::ostringstream out, err;
  const fs::path stream = fixture / "stream";
  const int code = cli::dispatch({"run", "--ped-model", (fixture / "models" / "pedestrian.pecas").string(),
                                  "--eye-model", (fixture / "models" / "eye.pecas").string(), "--outward",
                                  (stream / "outward").string(), "--driver", (stream / "driver").string(),
                                  "--roi-file", (stream / "roi.jsonl").string(), "--log", log.string()},
                                 out, err);
  if (code != 0) return {false, "run exited " + std::to_string(code) + ": " + err.str()};
  if (!fs::exists(golden)) return {false, "golden file " + golden.string() + " missing"};
  const auto got = testutil::read_bytes(log);
  const auto want = testutil::read_bytes(golden);
  const auto lines = std::count(got.begin(), got.end(), '\n');
  return {got == want, std::to_string(lines) + " events, " + (got == want ? "identical" : "differs from") +
                           " golden (" + std::to_string(want.size()) + " bytes)"};
}

Outcome serialization() {
  Rng rng(99);
  std::size_t identical = 0;
  for (int i = 0; i < 100; ++i) {
    const ModelSpec spec = rng.below(2) ? build_eye_net() : build_pedestrian_net();
    const auto bytes = encode_model(init_weights(spec, rng.next()));
    if (encode_model(decode_model(bytes)) == bytes) ++identical;
  }

  const auto good = encode_model(init_weights(build_eye_net(), 7));
  const std::size_t first_dim = 8 + 2 + build_eye_net().name.size() + 2 + 1 + 1;
  auto fault_of = [](const std::vector<std::uint8_t>& bytes) -> std::string {
    try {
      decode_model(bytes);
    } catch (const FormatError& e) {
      return FormatError::fault_name(e.fault());
    }
    return "accepted";
  };
  auto magic = good;
  magic[0] ^= 0x20;
  auto cut = good;
  cut.resize(cut.size() / 2);
  auto shape = good;
  shape[first_dim] += 1;
  const std::string m = fault_of(magic), t = fault_of(cut), s = fault_of(shape);
  return {identical == 100 && m == "bad_magic" && t == "truncated" && s == "shape_mismatch",
          std::to_string(identical) + "/100 round trips; corruptions -> " + m + ", " + t + ", " + s};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string fixture, golden;
  app.add_option("--fixture", fixture, "Fixture directory with trained models")->required();
  app.add_option("--golden", golden, "Checked-in alarm log")->required();
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"kernel oracle equivalence", kernel_oracles},
      {"fusion rule exactness", fusion_grid},
      {"split contract", split_contract},
      {"desk-scale training", [&] { return desk_training(fixture); }},
      {"learning-rate recovery", [&] { return lr_recovery(fixture); }},
      {"detector fixture", [&] { return detector_fixture(fixture); }},
      {"end-to-end golden run", [&] { return golden_run(fixture, golden); }},
      {"serialization", serialization},
  };
  std::size_t passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (o.pass) ++passed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::cout << passed << "/" << criteria.size() << " criteria passed\n";
  return passed == criteria.size() ? 0 : 1;
}
