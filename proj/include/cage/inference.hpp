#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "cage/network.hpp"

namespace cage {

/// The four corner crops and the center crop of a 256x256 image, in that
/// fixed order: offsets (0,0), (0,32), (32,0), (32,32), (16,16).
std::array<Tensorf, 5> five_crop(const Tensorf& image256);

struct Prediction {
  Tensorf probs;                     // mean of the five per-crop vectors
  int predicted = 0;                 // argmax, ties to the lowest class index
  std::array<Tensorf, 5> per_crop;
};

/// Crop-level classifier: maps a 224x224x3 crop to a probability vector.
using CropClassifier = std::function<Tensorf(const Tensorf&)>;

/// Rescales to 256x256, runs the classifier on all five crops and averages
/// the probability vectors in fixed crop order.
Prediction predict_image(const CropClassifier& classifier, const Tensorf& image);

/// The production classifier: mean subtraction plus an eval-mode forward
/// pass through the full model.
CropClassifier make_crop_classifier(const NetworkSpec& model, const WeightStore& store,
                                    const PreprocessConfig& preprocess_config);

/// One prediction per readable image, ordered by path; unreadable inputs
/// are reported through warnings and skipped.
std::vector<std::pair<std::string, Prediction>> predict_batch(
    const CropClassifier& classifier, std::vector<std::string> paths,
    std::vector<std::string>* warnings = nullptr);

/// Prediction log: `path<TAB>predicted_label<TAB>p0..p7`, probabilities at
/// six decimal places.
std::string format_prediction_line(const std::string& path, const Prediction& prediction);
void write_prediction_log(const std::string& path,
                          const std::vector<std::pair<std::string, Prediction>>& rows);

struct PredictionRow {
  std::string path;
  int predicted = 0;
  std::array<double, kNumAgeClasses> probs{};
};
std::vector<PredictionRow> read_prediction_log(const std::string& path);

}  // namespace cage
