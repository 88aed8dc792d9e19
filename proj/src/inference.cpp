#include "cage/inference.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cage/errors.hpp"
#include "cage/image_io.hpp"
#include "cage/image_ops.hpp"

namespace cage {

std::array<Tensorf, 5> five_crop(const Tensorf& image256) {
  if (image256.rank() != 3 || image256.dim(0) != 256 || image256.dim(1) != 256)
    throw ShapeError("five_crop expects a 256x256 image, got " +
                     shape_string(image256.shape()));
  constexpr int offsets[5][2] = {{0, 0}, {0, 32}, {32, 0}, {32, 32}, {16, 16}};
  std::array<Tensorf, 5> crops;
  for (int i = 0; i < 5; ++i)
    crops[static_cast<std::size_t>(i)] =
        crop_window(image256, offsets[i][0], offsets[i][1], 224, 224);
  return crops;
}

Prediction predict_image(const CropClassifier& classifier, const Tensorf& image) {
  if (!classifier) throw ValueError("predict called without a loaded model");
  const Tensorf rescaled =
      (image.rank() == 3 && image.dim(0) == 256 && image.dim(1) == 256)
          ? image
          : rescale_image(image, 256, 256);
  Prediction prediction;
  Tensord sum;
  for (int i = 0; i < 5; ++i) {
    Tensorf probs = classifier(five_crop(rescaled)[static_cast<std::size_t>(i)]);
    if (probs.rank() != 1)
      throw ShapeError("crop classifier must return a probability vector, got " +
                       shape_string(probs.shape()));
    if (i == 0) sum = Tensord(probs.shape());
    if (probs.size() != sum.size())
      throw ShapeError("crop classifier output length changed between crops");
    for (std::int64_t k = 0; k < probs.size(); ++k) sum[k] += probs[k];
    prediction.per_crop[static_cast<std::size_t>(i)] = std::move(probs);
  }
  prediction.probs = Tensorf(sum.shape());
  for (std::int64_t k = 0; k < sum.size(); ++k)
    prediction.probs[k] = static_cast<float>(sum[k] / 5.0);
  prediction.predicted = 0;
  for (std::int64_t k = 1; k < prediction.probs.size(); ++k)
    if (prediction.probs[k] > prediction.probs[prediction.predicted])
      prediction.predicted = static_cast<int>(k);
  return prediction;
}

CropClassifier make_crop_classifier(const NetworkSpec& model, const WeightStore& store,
                                    const PreprocessConfig& preprocess_config) {
  validate_weights(model, store);
  return [&model, &store, preprocess_config](const Tensorf& crop) {
    return forward(model, store, preprocess(crop, preprocess_config), Mode::Eval);
  };
}

std::vector<std::pair<std::string, Prediction>> predict_batch(
    const CropClassifier& classifier, std::vector<std::string> paths,
    std::vector<std::string>* warnings) {
  std::sort(paths.begin(), paths.end());
  std::vector<std::pair<std::string, Prediction>> rows;
  for (const std::string& path : paths) {
    Tensorf image;
    try {
      image = load_image(path);
    } catch (const Error& e) {
      if (warnings) warnings->push_back("skipping " + path + ": " + e.what());
      continue;
    }
    rows.emplace_back(path, predict_image(classifier, image));
  }
  return rows;
}

std::string format_prediction_line(const std::string& path, const Prediction& prediction) {
  std::string line = path;
  line += '\t';
  line += age_class_labels()[static_cast<std::size_t>(prediction.predicted)];
  char buf[32];
  for (std::int64_t k = 0; k < prediction.probs.size(); ++k) {
    std::snprintf(buf, sizeof buf, "\t%.6f", static_cast<double>(prediction.probs[k]));
    line += buf;
  }
  return line;
}

void write_prediction_log(const std::string& path,
                          const std::vector<std::pair<std::string, Prediction>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& [img, prediction] : rows)
    out << format_prediction_line(img, prediction) << '\n';
  if (!out) throw IoError("short write to " + path);
}

std::vector<PredictionRow> read_prediction_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<PredictionRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    PredictionRow row;
    std::string label;
    std::getline(fields, row.path, '\t');
    std::getline(fields, label, '\t');
    row.predicted = age_class_from_label(label);
    if (row.path.empty() || row.predicted < 0)
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed prediction line");
    for (double& p : row.probs) {
      std::string cell;
      if (!std::getline(fields, cell, '\t'))
        throw DataError(path + ":" + std::to_string(line_no) + ": expected 8 probabilities");
      try {
        p = std::stod(cell);
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(line_no) + ": bad probability " + cell);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cage
