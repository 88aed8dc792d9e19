#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <vector>

#include "cage/config.hpp"
#include "cage/dataset.hpp"
#include "cage/errors.hpp"
#include "cage/image_io.hpp"
#include "cage/inference.hpp"
#include "cage/metrics.hpp"
#include "cage/mtcnn.hpp"
#include "cage/network.hpp"
#include "cage/parallel.hpp"
#include "cage/training.hpp"
#include "cage/weight_io.hpp"

namespace fs = std::filesystem;
using namespace cage;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  for (const std::string& key : config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key,
        [key, &args](const std::string& value) { args.overrides.emplace_back(key, value); },
        "override config key " + key);
  }
}

PipelineConfig resolve_config(const CommonArgs& args) {
  PipelineConfig config;
  if (!args.config_path.empty()) config = load_config(args.config_path);
  for (const auto& [key, value] : args.overrides) apply_override(config, key, value);
  config.train.seed = config.seed;
  set_thread_count(config.threads);
  return config;
}

/// Removes this run's outputs if the command throws, so downstream stages
/// never consume half-written artifacts.
class OutputGuard {
 public:
  void track(const fs::path& path) { paths_.push_back(path); }
  void release() { paths_.clear(); }
  ~OutputGuard() {
    for (const fs::path& p : paths_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

 private:
  std::vector<fs::path> paths_;
};

std::vector<std::string> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("input directory not found: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && image_extension_supported(entry.path().string()))
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  return paths;
}

WeightStore load_weights_checked(const std::string& path, const char* what) {
  if (path.empty()) throw DataError(std::string("no ") + what + " weight file configured");
  if (!fs::is_regular_file(path))
    throw DataError(std::string(what) + " weight file not found: " + path);
  return load_weights(path);
}

int cmd_detect(const PipelineConfig& config, const std::string& input_dir,
               const std::string& output_dir) {
  const MtcnnDetector detector(load_weights_checked(config.detector_weights, "detector"),
                               config.mtcnn);
  fs::create_directories(output_dir);
  OutputGuard guard;
  std::vector<std::pair<std::string, Detection>> log_rows;
  for (const std::string& path : list_images(input_dir)) {
    Tensorf image;
    try {
      image = load_image(path);
    } catch (const Error& e) {
      std::cerr << "warning: skipping " << path << ": " << e.what() << '\n';
      continue;
    }
    const auto detections = detector.detect(image);
    const fs::path rel = fs::relative(path, input_dir);
    int face = 0;
    for (const Detection& det : detections) {
      fs::path chip_path = fs::path(output_dir) / rel.parent_path() /
                           (rel.stem().string() + "_f" + std::to_string(face++) + ".ppm");
      fs::create_directories(chip_path.parent_path());
      guard.track(chip_path);
      save_ppm(chip_path.string(), extract_face_chip(image, det, config.chip_size));
      log_rows.emplace_back(path, det);
    }
  }
  const fs::path log_path = fs::path(output_dir) / "detections.txt";
  guard.track(log_path);
  write_detection_log(log_path.string(), log_rows);
  guard.release();
  std::cout << "detected " << log_rows.size() << " faces\n";
  return 0;
}

int cmd_prepare(const PipelineConfig& config, const std::string& input_dir,
                const std::string& manifest_path) {
  std::vector<std::string> warnings;
  DatasetManifest manifest = ingest(input_dir, &warnings);
  manifest = split(std::move(manifest), config.split_ratio, config.seed, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
  OutputGuard guard;
  guard.track(manifest_path);
  if (!fs::path(manifest_path).parent_path().empty())
    fs::create_directories(fs::path(manifest_path).parent_path());
  save_manifest(manifest_path, manifest);
  guard.release();
  const auto counts = manifest.class_counts();
  for (int c = 0; c < kNumAgeClasses; ++c)
    std::cout << age_class_labels()[static_cast<std::size_t>(c)] << "\ttrain "
              << counts[static_cast<std::size_t>(c)][0] << "\tval "
              << counts[static_cast<std::size_t>(c)][1] << '\n';
  return 0;
}

int cmd_train(const PipelineConfig& config, const std::string& manifest_path,
              const std::string& output_dir) {
  if (!fs::is_regular_file(manifest_path))
    throw DataError("manifest not found: " + manifest_path);
  const DatasetManifest manifest = load_manifest(manifest_path);
  const NetworkSpec backbone = build_backbone();
  const NetworkSpec head = build_head();

  Rng rng(config.seed);
  WeightStore store;
  if (!config.backbone_weights.empty()) {
    store = load_weights_checked(config.backbone_weights, "backbone");
    validate_weights(backbone, store);
  } else {
    Rng backbone_rng = rng.derive(1);
    init_weights(backbone, store, backbone_rng);
  }
  Rng head_rng = rng.derive(2);
  init_weights(head, store, head_rng);

  fs::create_directories(output_dir);
  OutputGuard guard;
  const fs::path model_path = fs::path(output_dir) / "model.cage";
  const fs::path log_path = fs::path(output_dir) / "train_log.tsv";
  guard.track(model_path);
  guard.track(log_path);

  EpochCallback on_epoch = [&](int epoch, const WeightStore& current) {
    if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
      const fs::path ckpt =
          fs::path(output_dir) / ("checkpoint_epoch" + std::to_string(epoch) + ".cage");
      guard.track(ckpt);
      save_weights(ckpt.string(), current);
    }
  };

  const TrainLog log = train(backbone, head, store, manifest, config.train, config.preprocess,
                             on_epoch);
  save_weights(model_path.string(), store);
  save_train_log(log_path.string(), log);
  guard.release();
  for (const EpochStats& e : log)
    std::cout << "epoch " << e.epoch << "\tloss " << e.train_loss << "\tval_acc "
              << e.val_accuracy << '\n';
  std::cout << "model written to " << model_path.string() << '\n';
  return 0;
}

int cmd_predict(const PipelineConfig& config, const std::string& input,
                const std::string& output_path, const std::string& split_filter) {
  WeightStore store = load_weights_checked(config.model_weights, "model");
  const NetworkSpec model = build_full_model();
  const CropClassifier classifier = make_crop_classifier(model, store, config.preprocess);

  std::vector<std::string> paths;
  if (fs::is_directory(input)) {
    if (split_filter != "all")
      throw ValueError("--split requires a manifest input");
    paths = list_images(input);
  } else if (fs::is_regular_file(input)) {
    const DatasetManifest manifest = load_manifest(input);
    for (const Sample& s : manifest.samples) {
      if (split_filter == "train" && s.split != SplitTag::Train) continue;
      if (split_filter == "val" && s.split != SplitTag::Val) continue;
      paths.push_back(s.path);
    }
  } else {
    throw DataError("predict input not found: " + input);
  }

  std::vector<std::pair<std::string, Prediction>> rows;
  std::vector<std::string> warnings;
  if (config.predict_run_detection) {
    // extract the best face chip per image first, then classify the chip
    const MtcnnDetector detector(load_weights_checked(config.detector_weights, "detector"),
                                 config.mtcnn);
    std::sort(paths.begin(), paths.end());
    for (const std::string& path : paths) {
      Tensorf image;
      try {
        image = load_image(path);
      } catch (const Error& e) {
        warnings.push_back("skipping " + path + ": " + e.what());
        continue;
      }
      const auto detections = detector.detect(image);
      if (detections.empty()) {
        warnings.push_back("no face found in " + path);
        continue;
      }
      const auto best =
          std::max_element(detections.begin(), detections.end(),
                           [](const Detection& a, const Detection& b) {
                             return a.box.score < b.box.score;
                           });
      rows.emplace_back(path, predict_image(classifier,
                                            extract_face_chip(image, *best, config.chip_size)));
    }
  } else {
    rows = predict_batch(classifier, paths, &warnings);
  }
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';

  OutputGuard guard;
  guard.track(output_path);
  if (!fs::path(output_path).parent_path().empty())
    fs::create_directories(fs::path(output_path).parent_path());
  write_prediction_log(output_path, rows);
  guard.release();
  std::cout << "predicted " << rows.size() << " images\n";
  return 0;
}

int cmd_evaluate(const PipelineConfig& config, const std::string& predictions_path,
                 const std::string& manifest_path, const std::string& output_dir) {
  if (!fs::is_regular_file(predictions_path))
    throw DataError("prediction log not found: " + predictions_path);
  if (!fs::is_regular_file(manifest_path))
    throw DataError("manifest not found: " + manifest_path);
  const auto rows = read_prediction_log(predictions_path);
  const DatasetManifest manifest = load_manifest(manifest_path);
  std::map<std::string, int> truth_by_path;
  for (const Sample& s : manifest.samples) truth_by_path[s.path] = s.label;

  std::vector<int> preds, truths;
  for (const PredictionRow& row : rows) {
    auto it = truth_by_path.find(row.path);
    if (it == truth_by_path.end())
      throw DataError("prediction for " + row.path + " has no manifest entry");
    preds.push_back(row.predicted);
    truths.push_back(it->second);
  }

  const ClassReport report = classification_report(preds, truths);
  const double one_off = one_off_accuracy(preds, truths);
  const ConfusionMatrix matrix = confusion(preds, truths);

  char line[128];
  std::snprintf(line, sizeof line, "exact accuracy   %.4f\n1-off accuracy   %.4f\n",
                report.accuracy, one_off);
  std::string text = line;
  text += "\nconfusion matrix (rows: true, cols: predicted)\n";
  text += render_confusion(matrix);
  text += "\nnormalized confusion matrix\n";
  text += render_normalized_confusion(matrix);
  text += "\nclassification report\n";
  text += render_report(report);

  fs::create_directories(output_dir);
  OutputGuard guard;
  const fs::path text_path = fs::path(output_dir) / "metrics.txt";
  const fs::path tsv_path = fs::path(output_dir) / "metrics.tsv";
  guard.track(text_path);
  guard.track(tsv_path);
  std::ofstream(text_path, std::ios::binary) << text;
  std::ofstream(tsv_path, std::ios::binary) << render_metrics_tsv(report, one_off, matrix);
  guard.release();
  std::cout << text;
  (void)config;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"age range estimation pipeline: face extraction, head-only "
               "fine-tuning over 8 age classes, five-crop prediction and evaluation"};
  app.require_subcommand(1);

  CommonArgs detect_args, prepare_args, train_args, predict_args, evaluate_args;
  std::string detect_in, detect_out;
  std::string prepare_in, prepare_out = "manifest.tsv";
  std::string train_manifest, train_out = "out";
  std::string predict_model, predict_in, predict_out = "predictions.tsv", predict_split = "all";
  std::string eval_pred, eval_manifest, eval_out = "out";

  CLI::App* detect = app.add_subcommand("detect", "extract face chips with the MTCNN cascade");
  detect->add_option("--input", detect_in, "directory of input images")->required();
  detect->add_option("--output", detect_out, "directory for chips and detections.txt")->required();
  add_common_options(detect, detect_args);

  CLI::App* prepare = app.add_subcommand("prepare", "build a train/val manifest from a class tree");
  prepare->add_option("--input", prepare_in, "dataset root with one directory per age class")
      ->required();
  prepare->add_option("--output", prepare_out, "manifest file to write");
  add_common_options(prepare, prepare_args);

  CLI::App* train_cmd = app.add_subcommand("train", "fine-tune the classification head");
  train_cmd->add_option("--manifest", train_manifest, "manifest from `prepare`")->required();
  train_cmd->add_option("--output", train_out, "directory for model.cage and train_log.tsv");
  add_common_options(train_cmd, train_args);

  CLI::App* predict = app.add_subcommand("predict", "five-crop averaged prediction");
  predict->add_option("--model", predict_model, "trained model weights (.cage)");
  predict->add_option("--input", predict_in, "image directory or manifest file")->required();
  predict->add_option("--output", predict_out, "prediction log to write");
  predict->add_option("--split", predict_split, "all|train|val (manifest input only)")
      ->check(CLI::IsMember({"all", "train", "val"}));
  add_common_options(predict, predict_args);

  CLI::App* evaluate = app.add_subcommand("evaluate", "metrics for a prediction log");
  evaluate->add_option("--predictions", eval_pred, "prediction log from `predict`")->required();
  evaluate->add_option("--manifest", eval_manifest, "manifest with true labels")->required();
  evaluate->add_option("--output", eval_out, "directory for metrics.txt and metrics.tsv");
  add_common_options(evaluate, evaluate_args);

  try {
    app.parse(argc, argv);
    if (detect->parsed()) return cmd_detect(resolve_config(detect_args), detect_in, detect_out);
    if (prepare->parsed())
      return cmd_prepare(resolve_config(prepare_args), prepare_in, prepare_out);
    if (train_cmd->parsed())
      return cmd_train(resolve_config(train_args), train_manifest, train_out);
    if (predict->parsed()) {
      PipelineConfig config = resolve_config(predict_args);
      if (!predict_model.empty()) config.model_weights = predict_model;
      return cmd_predict(config, predict_in, predict_out, predict_split);
    }
    if (evaluate->parsed())
      return cmd_evaluate(resolve_config(evaluate_args), eval_pred, eval_manifest, eval_out);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const ValueError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
