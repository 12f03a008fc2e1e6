#include "pecas/cli.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "pecas/dataset.hpp"
#include "pecas/detector.hpp"
#include "pecas/errors.hpp"
#include "pecas/fusion.hpp"
#include "pecas/gradcheck.hpp"
#include "pecas/image.hpp"
#include "pecas/model.hpp"
#include "pecas/model_io.hpp"
#include "pecas/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace pecas::cli {

namespace {

struct TrainArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string log;
  std::string metrics_out;
  TrainConfig config;
};

struct EvalArgs {
  std::string model;
  std::string data;
  std::string metrics_out;
  std::uint64_t seed = 42;
};

struct DetectArgs {
  std::string model;
  std::string images;
  std::string out;
  std::string gt;
  std::string pr_out;
  std::string metrics_out;
  DetectorParams params;
};

struct RunArgs {
  std::string ped_model;
  std::string eye_model;
  std::string outward;
  std::string driver;
  std::string roi;
  std::string roi_file;
  std::string log;
  PipelineConfig config;
};

struct GradcheckArgs {
  std::uint64_t seed = 42;
  std::size_t seeds = 20;
  double epsilon = 1e-4;
  std::size_t samples_per_tensor = 16;
  double tolerance = 1e-4;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  return f;
}

void write_file(const std::string& path, const std::string& text) {
  auto f = open_output(path);
  f << text;
  if (!f) throw Error("write to '" + path + "' failed");
}

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json evaluation_json(const Evaluation& e) {
  const PrecisionRecall pr = precision_recall(e.confusion);
  return ordered_json{{"accuracy", e.accuracy},
                      {"confusion",
                       {{"tp", e.confusion.tp}, {"fp", e.confusion.fp}, {"fn", e.confusion.fn}, {"tn", e.confusion.tn}}},
                      {"precision", optional_json(pr.precision)},
                      {"recall", optional_json(pr.recall)}};
}

std::vector<fs::path> image_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm" || ext == ".ppm" || ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

// A model file that cannot be loaded is a configuration problem for every subcommand.
ModelWeights load_configured(const std::string& path, std::optional<std::string_view> expected = std::nullopt) {
  try {
    return load_model(path, expected);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

int run_train(const TrainArgs& a, std::ostream& out, const WarningSink& warn) {
  const auto spec = spec_by_name(a.model);
  if (!spec) throw ConfigError("unknown model '" + a.model + "' (expected eye or pedestrian)");
  validate_config(a.config);
  const DatasetSplit split = load_split(a.data, spec->input_shape[1], spec->input_shape[2], a.config.seed, warn);
  if (split.train.empty()) throw ConfigError("no training images under '" + a.data + "'");

  std::optional<std::ofstream> log;
  if (!a.log.empty()) log = open_output(a.log);
  const TrainResult result = train(*spec, split, a.config, [&](const EpochRecord& r) {
    const std::string line = format_epoch_line(r);
    out << line << '\n' << std::flush;
    if (log) *log << line << '\n';
  });
  save_model(result.weights, a.out);

  ordered_json metrics{{"model", a.model},
                       {"epochs", result.records.size()},
                       {"best_epoch", result.best_epoch},
                       {"best_val_accuracy", result.best_val_accuracy},
                       {"rollbacks", result.rollbacks},
                       {"train_size", split.train.size()},
                       {"val_size", split.validation.size()},
                       {"test_size", split.test.size()}};
  if (!split.test.empty()) metrics["test"] = evaluation_json(evaluate(result.weights, InMemorySamples(split.test)));
  if (!a.metrics_out.empty()) write_file(a.metrics_out, metrics.dump(2) + "\n");
  if (metrics.contains("test")) out << "test accuracy " << metrics["test"]["accuracy"].get<double>() << '\n';
  return kExitOk;
}

int run_eval(const EvalArgs& a, std::ostream& out, const WarningSink& warn) {
  const ModelWeights weights = load_configured(a.model);
  const std::size_t h = weights.spec.input_shape[1], w = weights.spec.input_shape[2];
  // A train/val/test tree is scored on its test part; a flat pos/neg tree is scored whole.
  const std::vector<LabeledImage> images = has_predefined_split(a.data)
                                               ? load_dataset_dir(fs::path(a.data) / "test", h, w, warn)
                                               : load_dataset_dir(a.data, h, w, warn);
  ordered_json metrics = evaluation_json(evaluate(weights, InMemorySamples(images)));
  metrics["model"] = weights.spec.name;
  metrics["samples"] = images.size();
  out << metrics.dump(2) << '\n';
  if (!a.metrics_out.empty()) write_file(a.metrics_out, metrics.dump(2) + "\n");
  return kExitOk;
}

int run_detect(const DetectArgs& a, std::ostream& out, const WarningSink& warn) {
  const ModelWeights weights = load_configured(a.model, kPedestrianModel);
  std::optional<std::vector<ImageTruth>> truth;
  if (!a.gt.empty()) truth = read_ground_truth(a.gt);

  std::vector<ImageDetections> all;
  for (const fs::path& file : image_files(a.images)) {
    Tensor image;
    try {
      image = read_image(file);
    } catch (const DecodeError& e) {
      warn(std::string("skipping ") + e.what());
      continue;
    }
    all.push_back({file.filename().string(), detect(weights, image, a.params)});
  }
  if (!a.out.empty()) {
    write_file(a.out, detections_jsonl(all));
  } else {
    out << detections_jsonl(all);
  }

  std::size_t total = 0;
  for (const auto& img : all) total += img.detections.size();
  ordered_json metrics{{"images", all.size()}, {"detections", total}};
  if (truth) {
    const ApResult ap = average_precision(all, *truth);
    metrics["ap"] = ap.ap;
    metrics["true_positives"] = ap.true_positives;
    metrics["false_positives"] = ap.false_positives;
    metrics["ground_truth"] = ap.ground_truth;
    if (!a.pr_out.empty()) write_file(a.pr_out, pr_curve_csv(ap.curve));
    out << "AP " << ap.ap << " (" << ap.true_positives << " TP, " << ap.false_positives << " FP, "
        << ap.ground_truth << " ground truth)\n";
  } else if (!a.pr_out.empty()) {
    throw ConfigError("--pr-out needs --gt");
  }
  if (!a.metrics_out.empty()) write_file(a.metrics_out, metrics.dump(2) + "\n");
  return kExitOk;
}

int run_fusion(const RunArgs& a, std::ostream& out, const WarningSink& warn) {
  const RoiConfig roi = a.roi_file.empty() ? RoiConfig::fixed(parse_rect(a.roi)) : RoiConfig::from_annotation_file(a.roi_file);
  const ModelWeights ped = load_configured(a.ped_model, kPedestrianModel);
  const ModelWeights eye = load_configured(a.eye_model, kEyeModel);

  std::optional<std::ofstream> log;
  if (!a.log.empty()) log = open_output(a.log);
  std::size_t alarms = 0;
  const auto events = run_pipeline(
      ped, eye, a.outward, a.driver, roi, a.config,
      [&](const AlarmEvent& e) {
        if (log) *log << alarm_event_json(e) << '\n';
        if (e.alarm) {
          ++alarms;
          out << "ALARM t=" << e.timestamp << " ped=" << e.pedestrian_score << " drowsy=" << e.drowsiness_score
              << " product=" << e.product << '\n';
        }
      },
      warn);
  if (log && !log->flush()) throw Error("write to '" + a.log + "' failed");
  out << events.size() << " events, " << alarms << " alarms\n";
  return kExitOk;
}

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const ModelSpec& spec : {build_eye_net(), build_pedestrian_net()}) {
    GradcheckReport arch;
    Rng master(a.seed);
    for (std::size_t s = 0; s < a.seeds; ++s) {
      Rng rng = master.fork(s);
      const ModelWeights weights = init_weights(spec, rng.next());
      Tensor input(spec.input_shape);
      for (double& v : input.data()) v = rng.uniform();
      const std::size_t label = rng.below(2);
      // The eye net is small enough to check every entry.
      const std::size_t per_tensor = spec.name == kEyeModel ? 0 : a.samples_per_tensor;
      const GradcheckReport r = finite_difference_gradcheck(network_fragment(weights, label), input,
                                                            {a.epsilon, per_tensor, rng.next()});
      arch.checked += r.checked;
      arch.skipped_kinks += r.skipped_kinks;
      if (r.max_rel_error >= arch.max_rel_error) {
        arch.max_rel_error = r.max_rel_error;
        arch.worst_entry = "seed " + std::to_string(s) + " " + r.worst_entry;
      }
    }
    out << spec.name << ": max relative error " << arch.max_rel_error << " over " << arch.checked << " entries ("
        << arch.skipped_kinks << " skipped at kinks), worst " << arch.worst_entry << '\n';
    worst = std::max(worst, arch.max_rel_error);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << "max relative error " << worst << (worst < a.tolerance ? " < " : " >= ") << a.tolerance << " in " << secs
      << " s\n";
  return worst < a.tolerance ? kExitOk : kExitFailure;
}

bool is_config_error(const std::exception& e) {
  return dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const LayoutError*>(&e) ||
         dynamic_cast<const ArgumentError*>(&e) || dynamic_cast<const SpecMismatchError*>(&e) ||
         dynamic_cast<const FormatError*>(&e);
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pedestrian and driver-drowsiness collision alarm toolkit", "pecas"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier and save its weights");
  train_cmd->add_option("--model", ta.model, "Architecture")->required()->check(CLI::IsMember({"eye", "pedestrian"}));
  train_cmd->add_option("--data", ta.data, "Dataset root (pos/ neg/, or train/ val/ test/)")->required();
  train_cmd->add_option("--out", ta.out, "Weights file to write")->required();
  train_cmd->add_option("--epochs", ta.config.epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", ta.config.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", ta.config.initial_lr, "Initial learning rate");
  train_cmd->add_option("--lr-drop", ta.config.lr_drop_factor, "Learning-rate factor applied on a validation dip");
  train_cmd->add_option("--dip-threshold", ta.config.dip_threshold, "Validation-accuracy drop that counts as a dip");
  train_cmd->add_option("--seed", ta.config.seed, "Seed for initialisation, splitting and shuffling");
  train_cmd->add_option("--log", ta.log, "Also write the epoch log here");
  train_cmd->add_option("--metrics-out", ta.metrics_out, "Final metrics JSON");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy, confusion matrix and precision/recall of a model");
  eval_cmd->add_option("--model", ea.model, "Weights file")->required();
  eval_cmd->add_option("--data", ea.data, "Dataset root (pos/ neg/, or a tree whose test/ is scored)")->required();
  eval_cmd->add_option("--metrics-out", ea.metrics_out, "Metrics JSON");
  eval_cmd->add_option("--seed", ea.seed, "Seed (evaluation is deterministic)");

  DetectArgs da;
  auto* detect_cmd = app.add_subcommand("detect", "Sliding-window pedestrian detection over an image directory");
  detect_cmd->add_option("--model", da.model, "Pedestrian weights file")->required();
  detect_cmd->add_option("--images", da.images, "Directory of PGM/PPM/PNG images")->required();
  detect_cmd->add_option("--out", da.out, "Detections JSON lines (stdout if omitted)");
  detect_cmd->add_option("--gt", da.gt, "Ground-truth JSON lines; enables AP");
  detect_cmd->add_option("--pr-out", da.pr_out, "Precision-recall curve CSV (needs --gt)");
  detect_cmd->add_option("--metrics-out", da.metrics_out, "Metrics JSON");
  detect_cmd->add_option("--score-floor", da.params.score_floor, "Minimum window score kept");
  detect_cmd->add_option("--nms-iou", da.params.nms_iou, "NMS overlap threshold");
  detect_cmd->add_option("--scale-factor", da.params.scale_factor, "Pyramid downscale factor")
      ->check(CLI::Range(1.0001, 100.0));
  detect_cmd->add_option("--stride", da.params.stride, "Window stride in pixels")->check(CLI::PositiveNumber);

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "Replay the two camera streams and raise alarms");
  run_cmd->add_option("--ped-model", ra.ped_model, "Pedestrian weights file")->required();
  run_cmd->add_option("--eye-model", ra.eye_model, "Eye-state weights file")->required();
  run_cmd->add_option("--outward", ra.outward, "Outward-facing frame directory")->required();
  run_cmd->add_option("--driver", ra.driver, "Driver-facing frame directory")->required();
  auto* roi_opt = run_cmd->add_option("--roi", ra.roi, "Fixed eye rectangle x,y,w,h");
  auto* roi_file_opt = run_cmd->add_option("--roi-file", ra.roi_file, "Per-frame eye rectangles (JSON lines)");
  roi_opt->excludes(roi_file_opt);
  run_cmd->add_option("--threshold", ra.config.threshold, "Alarm fires when ped * drowsy exceeds this");
  run_cmd->add_option("--dt", ra.config.dt, "Slot spacing of the staggered schedule, seconds");
  run_cmd->add_option("--fps", ra.config.fps, "Frame rate used to timestamp both streams");
  run_cmd->add_option("--log", ra.log, "Event log, JSON lines");

  GradcheckArgs ga;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of both architectures");
  gradcheck_cmd->add_option("--seed", ga.seed, "Base seed");
  gradcheck_cmd->add_option("--seeds", ga.seeds, "Random networks per architecture")->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--epsilon", ga.epsilon, "Central-difference step");
  gradcheck_cmd->add_option("--samples-per-tensor", ga.samples_per_tensor,
                            "Entries checked per tensor of the pedestrian net (0 = all)");
  gradcheck_cmd->add_option("--tolerance", ga.tolerance, "Largest acceptable relative error");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  if (run_cmd->parsed() && ra.roi.empty() && ra.roi_file.empty()) {
    err << "run: one of --roi or --roi-file is required\n";
    return kExitUsage;
  }

  const WarningSink warn = [&err](const std::string& m) { err << "warning: " << m << '\n'; };
  try {
    if (train_cmd->parsed()) return run_train(ta, out, warn);
    if (eval_cmd->parsed()) return run_eval(ea, out, warn);
    if (detect_cmd->parsed()) return run_detect(da, out, warn);
    if (run_cmd->parsed()) return run_fusion(ra, out, warn);
    return run_gradcheck(ga, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return is_config_error(e) ? kExitUsage : kExitFailure;
  }
}

}  // namespace pecas::cli
