#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "cage/tensor.hpp"

namespace cage {

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates mirroring the parameter shapes, plus the
/// shared step count used for bias correction.
template <class S>
struct AdamState {
  AdamParams hp;
  std::int64_t step = 0;
  std::map<std::string, Tensor<S>> m, v;
};

/// One Adam update over named parameters:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
/// Moment tensors are created lazily on the first step.
template <class S>
void adam_step(std::map<std::string, Tensor<S>>& params,
               const std::map<std::string, Tensor<S>>& grads, AdamState<S>& state) {
  state.step += 1;
  const double b1 = state.hp.beta1, b2 = state.hp.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (auto& [name, theta] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw ValueError("adam_step missing gradient for " + name);
    const Tensor<S>& g = git->second;
    if (!g.same_shape(theta))
      throw ShapeError("adam_step gradient shape " + shape_string(g.shape()) +
                       " does not match parameter " + name + " " + shape_string(theta.shape()));
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      state.m.emplace(name, Tensor<S>(theta.shape()));
      state.v.emplace(name, Tensor<S>(theta.shape()));
    }
    Tensor<S>& m = state.m.at(name);
    Tensor<S>& v = state.v.at(name);
    for (std::int64_t i = 0; i < theta.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<S>(mi);
      v[i] = static_cast<S>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      theta[i] = static_cast<S>(static_cast<double>(theta[i]) -
                                state.hp.lr * m_hat / (std::sqrt(v_hat) + state.hp.eps));
    }
  }
}

}  // namespace cage
