#pragma once

#include <cstdint>
#include <string>

#include "cage/mtcnn.hpp"
#include "cage/network.hpp"
#include "cage/training.hpp"

namespace cage {

/// Everything a pipeline run needs, with defaults for every field.
/// Persisted as plain `key=value` text so runs diff cleanly; any key can
/// also be overridden on the command line.
struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 1;

  std::string data_root;
  std::string out_dir = "out";
  std::string detector_weights;
  std::string backbone_weights;
  std::string model_weights;

  MtcnnConfig mtcnn{};
  int chip_size = 256;

  double split_ratio = 0.8;

  PreprocessConfig preprocess{};
  TrainConfig train{};
  int checkpoint_every = 0;

  bool predict_run_detection = false;

  bool operator==(const PipelineConfig&) const = default;
};

std::string config_to_text(const PipelineConfig& config);
PipelineConfig config_from_text(const std::string& text);

PipelineConfig load_config(const std::string& path);
void save_config(const std::string& path, const PipelineConfig& config);

/// Applies one `key=value` override; unknown keys are usage errors.
void apply_override(PipelineConfig& config, const std::string& key, const std::string& value);

/// All recognized keys, in file order.
std::vector<std::string> config_keys();

}  // namespace cage
