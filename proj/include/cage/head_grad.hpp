#pragma once

#include <Eigen/Core>
#include <map>
#include <string>

#include "cage/loss.hpp"
#include "cage/network.hpp"
#include "cage/rng.hpp"

namespace cage {

/// Structural view of a classification head spec:
/// fc, relu, dropout, fc, relu, fc, softmax.
struct HeadLayout {
  std::string fc1, fc2, fc3;
  int in_dim = 0, hidden1 = 0, hidden2 = 0, classes = 0;
  double dropout_rate = 0;
};

inline HeadLayout parse_head_layout(const NetworkSpec& head) {
  const auto& ls = head.layers;
  const bool shape_ok =
      ls.size() == 7 && ls[0].kind == LayerKind::Conv && ls[1].kind == LayerKind::Relu &&
      ls[2].kind == LayerKind::Dropout && ls[3].kind == LayerKind::Conv &&
      ls[4].kind == LayerKind::Relu && ls[5].kind == LayerKind::Conv &&
      ls[6].kind == LayerKind::Softmax;
  if (!shape_ok)
    throw ShapeError("head must be fc/relu/dropout/fc/relu/fc/softmax");
  HeadLayout layout;
  layout.fc1 = ls[0].name;
  layout.fc2 = ls[3].name;
  layout.fc3 = ls[5].name;
  layout.in_dim = ls[0].conv.support * ls[0].conv.support * ls[0].conv.filt_dim;
  layout.hidden1 = ls[0].conv.num_filts;
  layout.hidden2 = ls[3].conv.num_filts;
  layout.classes = ls[5].conv.num_filts;
  layout.dropout_rate = ls[2].dropout_rate;
  if (ls[3].conv.filt_dim != layout.hidden1 || ls[5].conv.filt_dim != layout.hidden2)
    throw ShapeError("head fc widths do not chain");
  return layout;
}

template <class S>
struct HeadGradResult {
  S loss = 0;
  Tensor<S> probs;
  std::map<std::string, Tensor<S>> grads;  // keyed "<fc>.weight" / "<fc>.bias"
};

/// Forward plus exact backpropagation through the head for one sample.
/// The dropout mask is drawn once from rng at the start of the call, so
/// repeated calls from the same rng state are bitwise identical. All
/// arithmetic runs in 64-bit; results are stored back at the scalar type.
template <class S>
HeadGradResult<S> head_forward_backward(const NetworkSpec& head_spec,
                                        const std::map<std::string, Tensor<S>>& params,
                                        const Tensor<S>& features, const Tensor<S>& onehot,
                                        Mode mode, Rng* rng = nullptr) {
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;
  const HeadLayout layout = parse_head_layout(head_spec);
  validate_one_hot(onehot);
  if (features.size() != layout.in_dim)
    throw ShapeError("head features size " + shape_string(features.shape()) +
                     " does not match fc input " + std::to_string(layout.in_dim));
  if (onehot.size() != layout.classes)
    throw ShapeError("label classes disagree with head output");

  auto weight = [&](const std::string& fc, int rows, int cols) -> Mat {
    const Tensor<S>& t = params.at(fc + ".weight");
    return Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
               t.data(), rows, cols)
        .template cast<double>();
  };
  auto bias = [&](const std::string& fc, int n) -> Vec {
    const Tensor<S>& t = params.at(fc + ".bias");
    return Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(t.data(), n)
        .template cast<double>();
  };

  const Mat w1 = weight(layout.fc1, layout.in_dim, layout.hidden1);
  const Mat w2 = weight(layout.fc2, layout.hidden1, layout.hidden2);
  const Mat w3 = weight(layout.fc3, layout.hidden2, layout.classes);
  const Vec b1 = bias(layout.fc1, layout.hidden1);
  const Vec b2 = bias(layout.fc2, layout.hidden2);
  const Vec b3 = bias(layout.fc3, layout.classes);

  Vec x0(layout.in_dim);
  for (int i = 0; i < layout.in_dim; ++i) x0(i) = static_cast<double>(features[i]);

  Vec mask = Vec::Ones(layout.hidden1);
  if (mode == Mode::Train && layout.dropout_rate > 0) {
    if (!rng) throw ValueError("head training with dropout needs an rng");
    const double keep_scale = 1.0 / (1.0 - layout.dropout_rate);
    for (int i = 0; i < layout.hidden1; ++i)
      mask(i) = rng->uniform() < layout.dropout_rate ? 0.0 : keep_scale;
  }

  const Vec z1 = w1.transpose() * x0 + b1;
  const Vec a1 = z1.cwiseMax(0.0);
  const Vec a1d = a1.cwiseProduct(mask);
  const Vec z2 = w2.transpose() * a1d + b2;
  const Vec a2 = z2.cwiseMax(0.0);
  const Vec z3 = w3.transpose() * a2 + b3;

  const double peak = z3.maxCoeff();
  Vec p = (z3.array() - peak).exp();
  p /= p.sum();

  HeadGradResult<S> result;
  result.probs = Tensor<S>({layout.classes});
  double loss = 0;
  Vec t(layout.classes);
  for (int i = 0; i < layout.classes; ++i) {
    result.probs[i] = static_cast<S>(p(i));
    t(i) = static_cast<double>(onehot[i]);
    if (t(i) != 0.0) loss -= std::log(std::max(p(i), 1e-12));
  }
  result.loss = static_cast<S>(loss);

  const Vec dz3 = p - t;
  const Mat gw3 = a2 * dz3.transpose();
  const Vec da2 = w3 * dz3;
  const Vec dz2 = (z2.array() > 0.0).select(da2, 0.0);
  const Mat gw2 = a1d * dz2.transpose();
  const Vec da1 = (w2 * dz2).cwiseProduct(mask);
  const Vec dz1 = (z1.array() > 0.0).select(da1, 0.0);
  const Mat gw1 = x0 * dz1.transpose();

  auto store_weight = [&](const std::string& fc, const Mat& g) {
    const Tensor<S>& param = params.at(fc + ".weight");
    Tensor<S> out(param.shape());
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        out.data(), g.rows(), g.cols()) = g.template cast<S>();
    result.grads[fc + ".weight"] = std::move(out);
  };
  auto store_bias = [&](const std::string& fc, const Vec& g) {
    const Tensor<S>& param = params.at(fc + ".bias");
    Tensor<S> out(param.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = static_cast<S>(g(i));
    result.grads[fc + ".bias"] = std::move(out);
  };
  store_weight(layout.fc1, gw1);
  store_bias(layout.fc1, dz1);
  store_weight(layout.fc2, gw2);
  store_bias(layout.fc2, dz2);
  store_weight(layout.fc3, gw3);
  store_bias(layout.fc3, dz3);
  return result;
}

}  // namespace cage
