#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cage/adam.hpp"
#include "cage/dataset.hpp"
#include "cage/network.hpp"

namespace cage {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  std::uint64_t seed = 0;
  AdamParams adam{};
  double rotation_max_deg = 10.0;
  double flip_prob = 0.5;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;    // mean cross-entropy over the epoch's samples
  double val_accuracy = 0;  // exact accuracy; 0 when the val split is empty
};

using TrainLog = std::vector<EpochStats>;

/// Called after each epoch with the epoch number and the weight store
/// already synced with the trained head.
using EpochCallback = std::function<void(int, const WeightStore&)>;

/// Head-only training on precomputed feature vectors. Shuffles per epoch,
/// batches, averages the cross-entropy over each batch and applies one
/// Adam step per batch. The store's head tensors are updated in place.
TrainLog train_head_on_features(const NetworkSpec& head_spec, WeightStore& store,
                                const std::vector<Tensorf>& train_features,
                                const std::vector<int>& train_labels,
                                const std::vector<Tensorf>& val_features,
                                const std::vector<int>& val_labels, const TrainConfig& config,
                                const EpochCallback& on_epoch = nullptr);

/// Full training loop: per epoch the train split is re-augmented
/// (rescale 256, random 224 crop, flip, rotation), pushed through the
/// frozen backbone, and the head is fitted on the resulting features.
/// Validation uses the deterministic center crop, so its features are
/// computed once and reused.
TrainLog train(const NetworkSpec& backbone_spec, const NetworkSpec& head_spec, WeightStore& store,
               const DatasetManifest& manifest, const TrainConfig& config,
               const PreprocessConfig& preprocess_config, const EpochCallback& on_epoch = nullptr);

/// Training log file: `epoch<TAB>mean_train_loss<TAB>val_exact_acc`.
void save_train_log(const std::string& path, const TrainLog& log);

/// Deterministic Fisher-Yates shuffle.
template <class T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i)
    std::swap(items[i - 1], items[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
}

/// Per-sample augmentation chain used by train(); exposed so tests can pin
/// its determinism against (image, seed).
Tensorf augment_sample(const Tensorf& image, const TrainConfig& config, Rng rng);

}  // namespace cage
