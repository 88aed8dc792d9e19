#pragma once

#include <cmath>

#include "cage/nn_ops.hpp"
#include "cage/tensor.hpp"

namespace cage {

template <class S>
Tensor<S> make_one_hot(int index, int classes) {
  if (index < 0 || index >= classes) throw ValueError("one-hot index out of range");
  Tensor<S> t({classes});
  t[index] = S(1);
  return t;
}

template <class S>
void validate_one_hot(const Tensor<S>& t) {
  if (t.rank() != 1) throw ShapeError("one-hot label must be rank-1");
  int ones = 0;
  for (std::int64_t i = 0; i < t.size(); ++i) {
    if (t[i] == S(1)) ++ones;
    else if (t[i] != S(0)) throw ValueError("one-hot entries must be 0 or 1");
  }
  if (ones != 1) throw ValueError("one-hot label must have exactly one 1");
}

/// Categorical cross-entropy -sum_c t_c ln(p_c). Probabilities are clamped
/// to >= 1e-12 before the log so a confidently wrong prediction yields a
/// large finite loss instead of infinity.
template <class S>
S cross_entropy(const Tensor<S>& p, const Tensor<S>& t) {
  validate_one_hot(t);
  if (p.rank() != 1 || p.size() != t.size())
    throw ShapeError("cross_entropy shapes disagree: " + shape_string(p.shape()) + " vs " +
                     shape_string(t.shape()));
  double loss = 0;
  for (std::int64_t i = 0; i < p.size(); ++i) {
    if (t[i] == S(0)) continue;
    loss -= std::log(std::max(static_cast<double>(p[i]), 1e-12));
  }
  return static_cast<S>(loss);
}

/// Gradient of cross_entropy(softmax(logits), t) w.r.t. the logits:
/// softmax(logits) - t.
template <class S>
Tensor<S> softmax_ce_grad(const Tensor<S>& logits, const Tensor<S>& t) {
  if (logits.rank() != 1 || logits.size() != t.size())
    throw ShapeError("softmax_ce_grad shapes disagree: " + shape_string(logits.shape()) +
                     " vs " + shape_string(t.shape()));
  Tensor<S> grad = softmax(logits);
  for (std::int64_t i = 0; i < grad.size(); ++i) grad[i] -= t[i];
  return grad;
}

}  // namespace cage
