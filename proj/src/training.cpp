#include "cage/training.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cage/errors.hpp"
#include "cage/head_grad.hpp"
#include "cage/image_io.hpp"
#include "cage/image_ops.hpp"

namespace cage {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowMatf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Batched double-precision trainer for the three fully connected layers.
/// Parameters and Adam moments live here as dense matrices; the float
/// store is synced after every step so checkpoints always see the current
/// head.
class HeadTrainer {
 public:
  HeadTrainer(const NetworkSpec& head_spec, WeightStore& store, const AdamParams& adam)
      : layout_(parse_head_layout(head_spec)), store_(store), adam_(adam) {
    w1_ = load_weight(layout_.fc1, layout_.in_dim, layout_.hidden1);
    w2_ = load_weight(layout_.fc2, layout_.hidden1, layout_.hidden2);
    w3_ = load_weight(layout_.fc3, layout_.hidden2, layout_.classes);
    b1_ = load_bias(layout_.fc1, layout_.hidden1);
    b2_ = load_bias(layout_.fc2, layout_.hidden2);
    b3_ = load_bias(layout_.fc3, layout_.classes);
    auto zero_like = [](const Mat& m) { return Mat::Zero(m.rows(), m.cols()).eval(); };
    m_ = {zero_like(w1_), zero_like(w2_), zero_like(w3_)};
    v_ = m_;
    mb_ = {Vec::Zero(b1_.size()), Vec::Zero(b2_.size()), Vec::Zero(b3_.size())};
    vb_ = mb_;
  }

  const HeadLayout& layout() const { return layout_; }

  /// One optimizer step on a batch; returns the mean cross-entropy.
  double train_batch(const std::vector<const Tensorf*>& features, const std::vector<int>& labels,
                     Rng& rng) {
    const int batch = static_cast<int>(features.size());
    Mat x0(batch, layout_.in_dim);
    Mat t = Mat::Zero(batch, layout_.classes);
    for (int s = 0; s < batch; ++s) {
      if (features[static_cast<std::size_t>(s)]->size() != layout_.in_dim)
        throw ShapeError("feature size does not match head input");
      for (int i = 0; i < layout_.in_dim; ++i)
        x0(s, i) = (*features[static_cast<std::size_t>(s)])[i];
      t(s, labels[static_cast<std::size_t>(s)]) = 1.0;
    }
    Mat mask = Mat::Ones(batch, layout_.hidden1);
    if (layout_.dropout_rate > 0) {
      const double keep_scale = 1.0 / (1.0 - layout_.dropout_rate);
      for (int s = 0; s < batch; ++s)
        for (int i = 0; i < layout_.hidden1; ++i)
          mask(s, i) = rng.uniform() < layout_.dropout_rate ? 0.0 : keep_scale;
    }

    const Mat z1 = (x0 * w1_).rowwise() + b1_.transpose();
    const Mat a1 = z1.cwiseMax(0.0).cwiseProduct(mask);
    const Mat z2 = (a1 * w2_).rowwise() + b2_.transpose();
    const Mat a2 = z2.cwiseMax(0.0);
    const Mat z3 = (a2 * w3_).rowwise() + b3_.transpose();

    Mat p(batch, layout_.classes);
    double loss_sum = 0;
    for (int s = 0; s < batch; ++s) {
      const double peak = z3.row(s).maxCoeff();
      Eigen::RowVectorXd e = (z3.row(s).array() - peak).exp();
      p.row(s) = e / e.sum();
      for (int c = 0; c < layout_.classes; ++c)
        if (t(s, c) != 0.0) loss_sum -= std::log(std::max(p(s, c), 1e-12));
    }
    const double mean_loss = loss_sum / batch;
    if (!std::isfinite(mean_loss)) throw NumericError("training loss is not finite");

    const double inv_batch = 1.0 / batch;
    const Mat dz3 = (p - t) * inv_batch;
    const Mat gw3 = a2.transpose() * dz3;
    const Vec gb3 = dz3.colwise().sum();
    const Mat dz2 = (z2.array() > 0.0).select(dz3 * w3_.transpose(), 0.0);
    const Mat gw2 = a1.transpose() * dz2;
    const Vec gb2 = dz2.colwise().sum();
    const Mat da1 = (dz2 * w2_.transpose()).cwiseProduct(mask);
    const Mat dz1 = (z1.array() > 0.0).select(da1, 0.0);
    const Mat gw1 = x0.transpose() * dz1;
    const Vec gb1 = dz1.colwise().sum();

    ++step_;
    adam_update(w1_, gw1, m_[0], v_[0]);
    adam_update(w2_, gw2, m_[1], v_[1]);
    adam_update(w3_, gw3, m_[2], v_[2]);
    adam_update_vec(b1_, gb1, mb_[0], vb_[0]);
    adam_update_vec(b2_, gb2, mb_[1], vb_[1]);
    adam_update_vec(b3_, gb3, mb_[2], vb_[2]);
    sync_store();
    return mean_loss;
  }

  int predict_eval(const Tensorf& feature) const {
    Vec x(layout_.in_dim);
    for (int i = 0; i < layout_.in_dim; ++i) x(i) = feature[i];
    const Vec a1 = (w1_.transpose() * x + b1_).cwiseMax(0.0);
    const Vec a2 = (w2_.transpose() * a1 + b2_).cwiseMax(0.0);
    const Vec z3 = w3_.transpose() * a2 + b3_;
    int best = 0;
    for (int c = 1; c < layout_.classes; ++c)
      if (z3(c) > z3(best)) best = c;  // ties keep the lowest index
    return best;
  }

 private:
  Mat load_weight(const std::string& fc, int rows, int cols) {
    const Tensorf& t = store_.at(fc + ".weight");
    if (t.size() != static_cast<std::int64_t>(rows) * cols)
      throw ShapeError(fc + ".weight does not match head layout");
    return Eigen::Map<const RowMatf>(t.data(), rows, cols).cast<double>();
  }
  Vec load_bias(const std::string& fc, int n) {
    const Tensorf& t = store_.at(fc + ".bias");
    if (t.size() != n) throw ShapeError(fc + ".bias does not match head layout");
    return Eigen::Map<const Eigen::VectorXf>(t.data(), n).cast<double>();
  }

  void adam_update(Mat& theta, const Mat& g, Mat& m, Mat& v) {
    const double c1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(step_));
    m = adam_.beta1 * m + (1.0 - adam_.beta1) * g;
    v = adam_.beta2 * v + (1.0 - adam_.beta2) * g.cwiseProduct(g);
    theta -= adam_.lr * ((m / c1).array() / ((v / c2).array().sqrt() + adam_.eps)).matrix();
  }
  void adam_update_vec(Vec& theta, const Vec& g, Vec& m, Vec& v) {
    Mat tm = theta, gm = g, mm = m, vm = v;
    adam_update(tm, gm, mm, vm);
    theta = tm;
    m = mm;
    v = vm;
  }

  void sync_store() {
    auto put_weight = [&](const std::string& fc, const Mat& w) {
      Tensorf& t = store_.at(fc + ".weight");
      Eigen::Map<RowMatf>(t.data(), w.rows(), w.cols()) = w.cast<float>();
    };
    auto put_bias = [&](const std::string& fc, const Vec& b) {
      Tensorf& t = store_.at(fc + ".bias");
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(b(i));
    };
    put_weight(layout_.fc1, w1_);
    put_weight(layout_.fc2, w2_);
    put_weight(layout_.fc3, w3_);
    put_bias(layout_.fc1, b1_);
    put_bias(layout_.fc2, b2_);
    put_bias(layout_.fc3, b3_);
  }

  HeadLayout layout_;
  WeightStore& store_;
  AdamParams adam_;
  std::int64_t step_ = 0;
  Mat w1_, w2_, w3_;
  Vec b1_, b2_, b3_;
  std::array<Mat, 3> m_, v_;
  std::array<Vec, 3> mb_, vb_;
};

double eval_accuracy(const HeadTrainer& trainer, const std::vector<Tensorf>& features,
                     const std::vector<int>& labels) {
  if (features.empty()) return 0.0;
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < features.size(); ++i)
    if (trainer.predict_eval(features[i]) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(features.size());
}

}  // namespace

TrainLog train_head_on_features(const NetworkSpec& head_spec, WeightStore& store,
                                const std::vector<Tensorf>& train_features,
                                const std::vector<int>& train_labels,
                                const std::vector<Tensorf>& val_features,
                                const std::vector<int>& val_labels, const TrainConfig& config,
                                const EpochCallback& on_epoch) {
  if (config.epochs < 0) throw ValueError("epochs must be >= 0");
  if (config.batch_size < 1) throw ValueError("batch_size must be >= 1");
  if (train_features.empty()) throw DataError("training set is empty");
  if (train_features.size() != train_labels.size() || val_features.size() != val_labels.size())
    throw ShapeError("features and labels differ in length");

  HeadTrainer trainer(head_spec, store, config.adam);
  const Rng base(config.seed);
  TrainLog log;
  std::vector<std::size_t> order(train_features.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng = base.derive(0x5000u + static_cast<std::uint64_t>(epoch));
    Rng mask_rng = base.derive(0xD000u + static_cast<std::uint64_t>(epoch));
    shuffle(order, shuffle_rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const Tensorf*> batch;
      std::vector<int> labels;
      for (std::size_t k = start; k < stop; ++k) {
        batch.push_back(&train_features[order[k]]);
        labels.push_back(train_labels[order[k]]);
      }
      loss_sum += trainer.train_batch(batch, labels, mask_rng) * static_cast<double>(batch.size());
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.val_accuracy = eval_accuracy(trainer, val_features, val_labels);
    log.push_back(stats);
    if (on_epoch) on_epoch(epoch, store);
  }
  return log;
}

Tensorf augment_sample(const Tensorf& image, const TrainConfig& config, Rng rng) {
  Tensorf out = rescale_image(image, 256, 256);
  out = random_crop(out, 224, rng);
  out = random_horizontal_flip(out, config.flip_prob, rng);
  out = random_rotate(out, config.rotation_max_deg, rng);
  return out;
}

TrainLog train(const NetworkSpec& backbone_spec, const NetworkSpec& head_spec, WeightStore& store,
               const DatasetManifest& manifest, const TrainConfig& config,
               const PreprocessConfig& preprocess_config, const EpochCallback& on_epoch) {
  if (config.epochs < 0) throw ValueError("epochs must be >= 0");
  if (config.batch_size < 1) throw ValueError("batch_size must be >= 1");
  const auto train_idx = manifest.indices(SplitTag::Train);
  const auto val_idx = manifest.indices(SplitTag::Val);
  if (train_idx.empty()) throw DataError("manifest has no train samples");
  validate_weights(concat_specs(backbone_spec, head_spec), store);

  HeadTrainer trainer(head_spec, store, config.adam);
  const Rng base(config.seed);

  auto backbone_features = [&](const Tensorf& input224) {
    return flatten(forward(backbone_spec, store, preprocess(input224, preprocess_config),
                           Mode::Eval));
  };

  // val crops are deterministic, so their features survive across epochs
  std::vector<Tensorf> val_features;
  std::vector<int> val_labels;
  for (std::size_t i : val_idx) {
    const Tensorf image = load_image(manifest.samples[i].path);
    val_features.push_back(backbone_features(center_crop(rescale_image(image, 256, 256), 224)));
    val_labels.push_back(manifest.samples[i].label);
  }

  TrainLog log;
  std::vector<std::size_t> order = train_idx;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng = base.derive(0x5000u + static_cast<std::uint64_t>(epoch));
    Rng mask_rng = base.derive(0xD000u + static_cast<std::uint64_t>(epoch));
    const Rng aug_base = base.derive(0xA000u + static_cast<std::uint64_t>(epoch));
    shuffle(order, shuffle_rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<Tensorf> feats;
      std::vector<const Tensorf*> batch;
      std::vector<int> labels;
      for (std::size_t k = start; k < stop; ++k) {
        const Sample& sample = manifest.samples[order[k]];
        const Tensorf image = load_image(sample.path);
        feats.push_back(backbone_features(augment_sample(image, config, aug_base.derive(order[k]))));
        labels.push_back(sample.label);
      }
      for (const Tensorf& f : feats) batch.push_back(&f);
      loss_sum += trainer.train_batch(batch, labels, mask_rng) * static_cast<double>(batch.size());
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.val_accuracy = eval_accuracy(trainer, val_features, val_labels);
    log.push_back(stats);
    if (on_epoch) on_epoch(epoch, store);
  }
  return log;
}

void save_train_log(const std::string& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  char buf[128];
  for (const EpochStats& e : log) {
    std::snprintf(buf, sizeof buf, "%d\t%.6f\t%.6f\n", e.epoch, e.train_loss, e.val_accuracy);
    out << buf;
  }
}

}  // namespace cage
