#include "cage/network.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "cage/errors.hpp"

namespace cage {

namespace {

LayerSpec conv_layer(int index, const std::string& name, int support, int filt_dim, int num_filts,
                     int stride, int pad) {
  LayerSpec l;
  l.index = index;
  l.kind = LayerKind::Conv;
  l.name = name;
  l.conv = {support, filt_dim, num_filts, stride, pad};
  return l;
}

LayerSpec relu_layer(int index, const std::string& name) {
  LayerSpec l;
  l.index = index;
  l.kind = LayerKind::Relu;
  l.name = name;
  return l;
}

LayerSpec pool_layer(int index, const std::string& name) {
  LayerSpec l;
  l.index = index;
  l.kind = LayerKind::MaxPool;
  l.name = name;
  l.pool = {2, 2};
  return l;
}

LayerSpec dropout_layer(int index, const std::string& name, float rate) {
  LayerSpec l;
  l.index = index;
  l.kind = LayerKind::Dropout;
  l.name = name;
  l.dropout_rate = rate;
  return l;
}

LayerSpec softmax_layer(int index, const std::string& name) {
  LayerSpec l;
  l.index = index;
  l.kind = LayerKind::Softmax;
  l.name = name;
  return l;
}

}  // namespace

NetworkSpec build_backbone() {
  NetworkSpec spec;
  auto& ls = spec.layers;
  int i = 1;
  auto block = [&](int group, int convs, int in_ch, int out_ch) {
    for (int c = 1; c <= convs; ++c) {
      const std::string suffix = std::to_string(group) + "_" + std::to_string(c);
      ls.push_back(conv_layer(i++, "conv" + suffix, 3, c == 1 ? in_ch : out_ch, out_ch, 1, 1));
      ls.push_back(relu_layer(i++, "relu" + suffix));
    }
    ls.push_back(pool_layer(i++, "pool" + std::to_string(group)));
  };
  block(1, 2, 3, 64);
  block(2, 2, 64, 128);
  block(3, 3, 128, 256);
  block(4, 3, 256, 512);
  block(5, 3, 512, 512);
  spec.trainable_from = ls.size();  // fully frozen
  return spec;
}

NetworkSpec build_head(int num_classes) {
  if (num_classes < 2) throw ValueError("head needs at least 2 classes");
  NetworkSpec spec;
  auto& ls = spec.layers;
  int i = 32;
  ls.push_back(conv_layer(i++, "fc6", 7, 512, 1000, 1, 0));
  ls.push_back(relu_layer(i++, "relu6"));
  ls.push_back(dropout_layer(i++, "dropout7", 0.3f));
  ls.push_back(conv_layer(i++, "fc8", 1, 1000, 100, 1, 0));
  ls.push_back(relu_layer(i++, "relu7"));
  ls.push_back(conv_layer(i++, "fc9", 1, 100, num_classes, 1, 0));
  ls.push_back(softmax_layer(i++, "prob"));
  spec.trainable_from = 0;  // fully trainable
  return spec;
}

NetworkSpec concat_specs(const NetworkSpec& frozen, const NetworkSpec& trainable) {
  NetworkSpec out = frozen;
  out.trainable_from = frozen.layers.size();
  out.layers.insert(out.layers.end(), trainable.layers.begin(), trainable.layers.end());
  return out;
}

NetworkSpec build_full_model(int num_classes) {
  return concat_specs(build_backbone(), build_head(num_classes));
}

std::vector<std::string> layer_tensor_names(const LayerSpec& layer) {
  if (layer.kind != LayerKind::Conv) return {};
  return {layer.name + ".weight", layer.name + ".bias"};
}

void init_weights(const NetworkSpec& spec, WeightStore& store, Rng& rng,
                  std::size_t start_layer) {
  for (std::size_t li = start_layer; li < spec.layers.size(); ++li) {
    const LayerSpec& layer = spec.layers[li];
    if (layer.kind != LayerKind::Conv) continue;
    const ConvParams& p = layer.conv;
    const double fan_in = static_cast<double>(p.support) * p.support * p.filt_dim;
    const double fan_out = static_cast<double>(p.support) * p.support * p.num_filts;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Tensorf w({p.support, p.support, p.filt_dim, p.num_filts});
    for (std::int64_t i = 0; i < w.size(); ++i)
      w[i] = static_cast<float>(rng.uniform(-bound, bound));
    store[layer.name + ".weight"] = std::move(w);
    store[layer.name + ".bias"] = Tensorf({p.num_filts}, 0.0f);
  }
}

void validate_weights(const NetworkSpec& spec, const WeightStore& store) {
  for (const LayerSpec& layer : spec.layers) {
    if (layer.kind != LayerKind::Conv) continue;
    const ConvParams& p = layer.conv;
    const Shape expect_w{p.support, p.support, p.filt_dim, p.num_filts};
    const Shape expect_b{p.num_filts};
    auto check = [&](const std::string& name, const Shape& expect) {
      auto it = store.find(name);
      if (it == store.end())
        throw WeightFormatError(WeightFormatError::Kind::UnknownTensor,
                                "weight store has no tensor " + name);
      if (it->second.shape() != expect)
        throw WeightFormatError(WeightFormatError::Kind::DimMismatch,
                                name + " has shape " + shape_string(it->second.shape()) +
                                    ", expected " + shape_string(expect));
    };
    check(layer.name + ".weight", expect_w);
    check(layer.name + ".bias", expect_b);
  }
}

Tensorf forward(const NetworkSpec& spec, const WeightStore& store, const Tensorf& input,
                Mode mode, Rng* rng) {
  Tensorf x = input;
  for (const LayerSpec& layer : spec.layers) {
    try {
      switch (layer.kind) {
        case LayerKind::Conv: {
          auto wit = store.find(layer.name + ".weight");
          auto bit = store.find(layer.name + ".bias");
          if (wit == store.end() || bit == store.end())
            throw WeightFormatError(WeightFormatError::Kind::UnknownTensor,
                                    "missing tensors for layer " + layer.name);
          x = conv2d(x, wit->second, bit->second, layer.conv.stride, layer.conv.pad);
          break;
        }
        case LayerKind::Relu:
          x = relu(x);
          break;
        case LayerKind::MaxPool:
          x = maxpool2d(x, layer.pool.support, layer.pool.stride);
          break;
        case LayerKind::Dropout:
          x = dropout(x, layer.dropout_rate, mode, rng);
          break;
        case LayerKind::Softmax:
          if (x.rank() == 3 && x.dim(0) == 1 && x.dim(1) == 1) x = flatten(x);
          x = softmax(x);
          break;
      }
    } catch (const WeightFormatError&) {
      throw;
    } catch (const Error& e) {
      throw ShapeError("layer " + layer.name + ": " + e.what());
    }
  }
  return x;
}

std::int64_t parameter_count(const NetworkSpec& spec) {
  std::int64_t total = 0;
  for (const LayerSpec& layer : spec.layers) {
    if (layer.kind != LayerKind::Conv) continue;
    const ConvParams& p = layer.conv;
    total += static_cast<std::int64_t>(p.support) * p.support * p.filt_dim * p.num_filts +
             p.num_filts;
  }
  return total;
}

namespace {

const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "mpool";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& name) {
  if (name == "conv") return LayerKind::Conv;
  if (name == "relu") return LayerKind::Relu;
  if (name == "mpool") return LayerKind::MaxPool;
  if (name == "dropout") return LayerKind::Dropout;
  if (name == "softmax") return LayerKind::Softmax;
  throw DataError("unknown layer kind: " + name);
}

}  // namespace

std::string spec_to_json(const NetworkSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& l : spec.layers) {
    nlohmann::json j{{"index", l.index}, {"kind", kind_name(l.kind)}, {"name", l.name}};
    if (l.kind == LayerKind::Conv)
      j["conv"] = {{"support", l.conv.support}, {"filt_dim", l.conv.filt_dim},
                   {"num_filts", l.conv.num_filts}, {"stride", l.conv.stride},
                   {"pad", l.conv.pad}};
    if (l.kind == LayerKind::MaxPool)
      j["pool"] = {{"support", l.pool.support}, {"stride", l.pool.stride}};
    if (l.kind == LayerKind::Dropout) j["rate"] = l.dropout_rate;
    layers.push_back(std::move(j));
  }
  return nlohmann::json{{"trainable_from", spec.trainable_from}, {"layers", layers}}.dump(2);
}

NetworkSpec spec_from_json(const std::string& text) {
  NetworkSpec spec;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad network spec json: ") + e.what());
  }
  spec.trainable_from = j.at("trainable_from").get<std::size_t>();
  for (const auto& lj : j.at("layers")) {
    LayerSpec l;
    l.index = lj.at("index").get<int>();
    l.kind = kind_from_name(lj.at("kind").get<std::string>());
    l.name = lj.at("name").get<std::string>();
    if (l.kind == LayerKind::Conv) {
      const auto& c = lj.at("conv");
      l.conv = {c.at("support").get<int>(), c.at("filt_dim").get<int>(),
                c.at("num_filts").get<int>(), c.at("stride").get<int>(), c.at("pad").get<int>()};
    }
    if (l.kind == LayerKind::MaxPool) {
      const auto& p = lj.at("pool");
      l.pool = {p.at("support").get<int>(), p.at("stride").get<int>()};
    }
    if (l.kind == LayerKind::Dropout) l.dropout_rate = lj.at("rate").get<float>();
    spec.layers.push_back(std::move(l));
  }
  return spec;
}

const std::vector<std::string>& age_class_labels() {
  static const std::vector<std::string> labels{"0-2",   "4-6",   "8-13",  "15-20",
                                               "25-32", "38-43", "48-53", "60+"};
  return labels;
}

int age_class_from_label(const std::string& label) {
  const auto& labels = age_class_labels();
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  return -1;
}

Tensorf preprocess(const Tensorf& image, const PreprocessConfig& config) {
  if (image.rank() != 3 || image.dim(2) != 3)
    throw ShapeError("preprocess expects HxWx3, got " + shape_string(image.shape()));
  const float means[3] = {config.mean_r, config.mean_g, config.mean_b};
  Tensorf out = image;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= means[i % 3];
  return out;
}

}  // namespace cage
