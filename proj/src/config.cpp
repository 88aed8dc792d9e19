#include "cage/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "cage/errors.hpp"

namespace cage {

namespace {

struct Field {
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValueError("config key " + key + ": not a number: " + value);
  }
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValueError("config key " + key + ": not an integer: " + value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ValueError("config key " + key + ": expected true/false: " + value);
}

// Field table; the declaration order is the file order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed",
       {[](const PipelineConfig& c) { return std::to_string(c.seed); },
        [](PipelineConfig& c, const std::string& v) {
          c.seed = static_cast<std::uint64_t>(parse_int("seed", v));
        }}},
      {"threads",
       {[](const PipelineConfig& c) { return std::to_string(c.threads); },
        [](PipelineConfig& c, const std::string& v) {
          c.threads = static_cast<int>(parse_int("threads", v));
        }}},
      {"data.root",
       {[](const PipelineConfig& c) { return c.data_root; },
        [](PipelineConfig& c, const std::string& v) { c.data_root = v; }}},
      {"out.dir",
       {[](const PipelineConfig& c) { return c.out_dir; },
        [](PipelineConfig& c, const std::string& v) { c.out_dir = v; }}},
      {"weights.detector",
       {[](const PipelineConfig& c) { return c.detector_weights; },
        [](PipelineConfig& c, const std::string& v) { c.detector_weights = v; }}},
      {"weights.backbone",
       {[](const PipelineConfig& c) { return c.backbone_weights; },
        [](PipelineConfig& c, const std::string& v) { c.backbone_weights = v; }}},
      {"weights.model",
       {[](const PipelineConfig& c) { return c.model_weights; },
        [](PipelineConfig& c, const std::string& v) { c.model_weights = v; }}},
      {"mtcnn.min_face",
       {[](const PipelineConfig& c) { return std::to_string(c.mtcnn.min_face); },
        [](PipelineConfig& c, const std::string& v) {
          c.mtcnn.min_face = static_cast<int>(parse_int("mtcnn.min_face", v));
        }}},
      {"mtcnn.factor",
       {[](const PipelineConfig& c) { return fmt_double(c.mtcnn.factor); },
        [](PipelineConfig& c, const std::string& v) {
          c.mtcnn.factor = static_cast<float>(parse_double("mtcnn.factor", v));
        }}},
      {"mtcnn.threshold_p",
       {[](const PipelineConfig& c) { return fmt_double(c.mtcnn.threshold_p); },
        [](PipelineConfig& c, const std::string& v) {
          c.mtcnn.threshold_p = static_cast<float>(parse_double("mtcnn.threshold_p", v));
        }}},
      {"mtcnn.threshold_r",
       {[](const PipelineConfig& c) { return fmt_double(c.mtcnn.threshold_r); },
        [](PipelineConfig& c, const std::string& v) {
          c.mtcnn.threshold_r = static_cast<float>(parse_double("mtcnn.threshold_r", v));
        }}},
      {"mtcnn.threshold_o",
       {[](const PipelineConfig& c) { return fmt_double(c.mtcnn.threshold_o); },
        [](PipelineConfig& c, const std::string& v) {
          c.mtcnn.threshold_o = static_cast<float>(parse_double("mtcnn.threshold_o", v));
        }}},
      {"mtcnn.chip_size",
       {[](const PipelineConfig& c) { return std::to_string(c.chip_size); },
        [](PipelineConfig& c, const std::string& v) {
          c.chip_size = static_cast<int>(parse_int("mtcnn.chip_size", v));
        }}},
      {"prep.split_ratio",
       {[](const PipelineConfig& c) { return fmt_double(c.split_ratio); },
        [](PipelineConfig& c, const std::string& v) {
          c.split_ratio = parse_double("prep.split_ratio", v);
        }}},
      {"model.mean_r",
       {[](const PipelineConfig& c) { return fmt_double(c.preprocess.mean_r); },
        [](PipelineConfig& c, const std::string& v) {
          c.preprocess.mean_r = static_cast<float>(parse_double("model.mean_r", v));
        }}},
      {"model.mean_g",
       {[](const PipelineConfig& c) { return fmt_double(c.preprocess.mean_g); },
        [](PipelineConfig& c, const std::string& v) {
          c.preprocess.mean_g = static_cast<float>(parse_double("model.mean_g", v));
        }}},
      {"model.mean_b",
       {[](const PipelineConfig& c) { return fmt_double(c.preprocess.mean_b); },
        [](PipelineConfig& c, const std::string& v) {
          c.preprocess.mean_b = static_cast<float>(parse_double("model.mean_b", v));
        }}},
      {"aug.rotation_max_deg",
       {[](const PipelineConfig& c) { return fmt_double(c.train.rotation_max_deg); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.rotation_max_deg = parse_double("aug.rotation_max_deg", v);
        }}},
      {"aug.flip_prob",
       {[](const PipelineConfig& c) { return fmt_double(c.train.flip_prob); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.flip_prob = parse_double("aug.flip_prob", v);
        }}},
      {"train.epochs",
       {[](const PipelineConfig& c) { return std::to_string(c.train.epochs); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.epochs = static_cast<int>(parse_int("train.epochs", v));
        }}},
      {"train.batch_size",
       {[](const PipelineConfig& c) { return std::to_string(c.train.batch_size); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.batch_size = static_cast<int>(parse_int("train.batch_size", v));
        }}},
      {"train.lr",
       {[](const PipelineConfig& c) { return fmt_double(c.train.adam.lr); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.adam.lr = parse_double("train.lr", v);
        }}},
      {"train.beta1",
       {[](const PipelineConfig& c) { return fmt_double(c.train.adam.beta1); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.adam.beta1 = parse_double("train.beta1", v);
        }}},
      {"train.beta2",
       {[](const PipelineConfig& c) { return fmt_double(c.train.adam.beta2); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.adam.beta2 = parse_double("train.beta2", v);
        }}},
      {"train.eps",
       {[](const PipelineConfig& c) { return fmt_double(c.train.adam.eps); },
        [](PipelineConfig& c, const std::string& v) {
          c.train.adam.eps = parse_double("train.eps", v);
        }}},
      {"train.checkpoint_every",
       {[](const PipelineConfig& c) { return std::to_string(c.checkpoint_every); },
        [](PipelineConfig& c, const std::string& v) {
          c.checkpoint_every = static_cast<int>(parse_int("train.checkpoint_every", v));
        }}},
      {"predict.run_detection",
       {[](const PipelineConfig& c) { return c.predict_run_detection ? "true" : "false"; },
        [](PipelineConfig& c, const std::string& v) {
          c.predict_run_detection = parse_bool("predict.run_detection", v);
        }}},
  };
  return table;
}

}  // namespace

std::string config_to_text(const PipelineConfig& config) {
  std::ostringstream out;
  for (const auto& [key, field] : fields()) out << key << '=' << field.get(config) << '\n';
  return out.str();
}

PipelineConfig config_from_text(const std::string& text) {
  PipelineConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValueError("config line " + std::to_string(line_no) + ": expected key=value");
    apply_override(config, line.substr(0, eq), line.substr(eq + 1));
  }
  return config;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return config_from_text(text.str());
}

void save_config(const std::string& path, const PipelineConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config " + path);
  out << config_to_text(config);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : fields()) keys.push_back(key);
  return keys;
}

void apply_override(PipelineConfig& config, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(config, value);
      // the seed fans out to the training config as well
      if (key == "seed") config.train.seed = config.seed;
      return;
    }
  }
  throw ValueError("unknown config key: " + key);
}

}  // namespace cage
