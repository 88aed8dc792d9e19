#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cage/nn_ops.hpp"
#include "cage/rng.hpp"
#include "cage/tensor.hpp"

namespace cage {

enum class LayerKind { Conv, Relu, MaxPool, Dropout, Softmax };

struct ConvParams {
  int support = 0;    // kernel spatial size
  int filt_dim = 0;   // input channels
  int num_filts = 0;  // output channels
  int stride = 1;
  int pad = 0;

  bool operator==(const ConvParams&) const = default;
};

struct PoolParams {
  int support = 2;
  int stride = 2;

  bool operator==(const PoolParams&) const = default;
};

struct LayerSpec {
  int index = 0;
  LayerKind kind = LayerKind::Relu;
  std::string name;
  ConvParams conv{};
  PoolParams pool{};
  float dropout_rate = 0;

  bool operator==(const LayerSpec&) const = default;
};

/// Ordered layer list; layers before position trainable_from are frozen.
struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::size_t trainable_from = 0;

  bool operator==(const NetworkSpec&) const = default;
};

/// The 31-layer VGG-Face convolutional stack (13 conv, 13 relu, 5 mpool),
/// input contract 224x224x3, output 7x7x512. Entirely frozen.
NetworkSpec build_backbone();

/// Replacement classification head, fully trainable. Fully connected
/// layers are expressed as convolutions collapsing the spatial extent:
/// fc6 7x7x512->1000, relu, dropout 0.3, fc8 1000->100, relu,
/// fc9 100->num_classes, softmax.
NetworkSpec build_head(int num_classes = 8);

/// Backbone followed by head; trainable_from points at fc6.
NetworkSpec build_full_model(int num_classes = 8);

NetworkSpec concat_specs(const NetworkSpec& frozen, const NetworkSpec& trainable);

using WeightStore = std::map<std::string, Tensorf>;

/// Names of the tensors a layer owns ("<name>.weight", "<name>.bias");
/// empty for parameterless layers.
std::vector<std::string> layer_tensor_names(const LayerSpec& layer);

/// Glorot-uniform weights, zero biases, for every parameterized layer at
/// or after start_layer.
void init_weights(const NetworkSpec& spec, WeightStore& store, Rng& rng,
                  std::size_t start_layer = 0);

/// Checks that the store has a tensor of the right shape for every
/// parameterized layer; unknown or misshaped entries are format errors.
void validate_weights(const NetworkSpec& spec, const WeightStore& store);

/// Applies the layers in order. Dropout draws from rng in train mode.
/// A mid-network shape break is reported with the offending layer's name.
Tensorf forward(const NetworkSpec& spec, const WeightStore& store, const Tensorf& input,
                Mode mode, Rng* rng = nullptr);

std::int64_t parameter_count(const NetworkSpec& spec);

std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& text);

constexpr int kNumAgeClasses = 8;

const std::vector<std::string>& age_class_labels();
int age_class_from_label(const std::string& label);  // -1 when unknown

struct PreprocessConfig {
  float mean_r = 131.1f;
  float mean_g = 103.9f;
  float mean_b = 91.6f;
};

/// Per-channel mean subtraction on a [0,255] RGB tensor.
Tensorf preprocess(const Tensorf& image, const PreprocessConfig& config);

}  // namespace cage
