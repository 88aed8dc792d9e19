#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "cage/parallel.hpp"
#include "cage/rng.hpp"
#include "cage/tensor.hpp"

namespace cage {

enum class Mode { Train, Eval };

namespace detail {
template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MapRow = Eigen::Map<RowMat<S>>;
template <class S>
using MapRowConst = Eigen::Map<const RowMat<S>>;
}  // namespace detail

/// 2D cross-correlation with zero padding over an HWC tensor.
/// input [H,W,Cin], weights [k,k,Cin,Cout], bias [Cout] -> [H',W',Cout].
/// Products are accumulated in 64-bit regardless of the storage scalar.
template <class S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& weights, const Tensor<S>& bias,
                 int stride, int pad) {
  if (input.rank() != 3)
    throw ShapeError("conv2d input must be rank-3 HWC, got " + shape_string(input.shape()));
  if (weights.rank() != 4)
    throw ShapeError("conv2d weights must be rank-4 [k,k,Cin,Cout], got " +
                     shape_string(weights.shape()));
  if (weights.dim(0) != weights.dim(1))
    throw ShapeError("conv2d kernel must be square, got " + shape_string(weights.shape()));
  const int h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const int k = weights.dim(0), cout = weights.dim(3);
  if (weights.dim(2) != cin)
    throw ShapeError("conv2d channel mismatch: input " + shape_string(input.shape()) +
                     " vs weights " + shape_string(weights.shape()));
  if (bias.rank() != 1 || bias.dim(0) != cout)
    throw ShapeError("conv2d bias must be [Cout]=" + std::to_string(cout) + ", got " +
                     shape_string(bias.shape()));
  if (stride < 1) throw ValueError("conv2d stride must be >= 1");
  if (pad < 0) throw ValueError("conv2d pad must be >= 0");
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;
  if (h + 2 * pad < k || w + 2 * pad < k || oh < 1 || ow < 1)
    throw ShapeError("conv2d kernel " + std::to_string(k) + " exceeds padded input " +
                     shape_string(input.shape()) + " (pad " + std::to_string(pad) + ")");

  const int patch = k * k * cin;
  Tensor<S> out({oh, ow, cout});

  auto fill_patch = [&](int r, int c, double* dst) {
    for (int ky = 0; ky < k; ++ky) {
      const int y = r * stride + ky - pad;
      for (int kx = 0; kx < k; ++kx) {
        const int x = c * stride + kx - pad;
        if (y < 0 || y >= h || x < 0 || x >= w) {
          std::fill(dst, dst + cin, 0.0);
        } else {
          const S* src = &input(y, x, 0);
          for (int ch = 0; ch < cin; ++ch) dst[ch] = static_cast<double>(src[ch]);
        }
        dst += cin;
      }
    }
  };

  if (oh == 1 && ow == 1) {
    // single output position (fully connected style): plain dot products,
    // no materialized double weight matrix
    std::vector<double> column(static_cast<std::size_t>(patch));
    fill_patch(0, 0, column.data());
    std::vector<double> acc(static_cast<std::size_t>(cout));
    for (int co = 0; co < cout; ++co) acc[static_cast<std::size_t>(co)] = bias[co];
    const S* wp = weights.data();
    for (int i = 0; i < patch; ++i) {
      const double xi = column[static_cast<std::size_t>(i)];
      const S* wrow = wp + static_cast<std::int64_t>(i) * cout;
      for (int co = 0; co < cout; ++co) acc[static_cast<std::size_t>(co)] += xi * wrow[co];
    }
    for (int co = 0; co < cout; ++co) out[co] = static_cast<S>(acc[static_cast<std::size_t>(co)]);
    return out;
  }

  Eigen::MatrixXd wd =
      detail::MapRowConst<S>(weights.data(), patch, cout).template cast<double>();
  Eigen::RowVectorXd bd =
      Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(bias.data(), cout)
          .template cast<double>();

  // im2col in row bands; band size bounds the scratch buffers, not the result
  int band = std::clamp(static_cast<int>((8 << 20) / (static_cast<std::int64_t>(ow) * patch * 8 + 1)),
                        1, oh);
  parallel_chunks(oh, band, [&](int r0, int r1) {
    thread_local std::vector<double> cols_buf, prod_buf;
    const std::size_t rows = static_cast<std::size_t>(r1 - r0) * ow;
    if (cols_buf.size() < rows * patch) cols_buf.resize(rows * patch);
    if (prod_buf.size() < rows * cout) prod_buf.resize(rows * cout);
    detail::MapRow<double> cols(cols_buf.data(), static_cast<Eigen::Index>(rows), patch);
    detail::MapRow<double> prod(prod_buf.data(), static_cast<Eigen::Index>(rows), cout);
    for (int r = r0; r < r1; ++r)
      for (int c = 0; c < ow; ++c)
        fill_patch(r, c, cols.row((r - r0) * ow + c).data());
    prod.noalias() = cols * wd;
    prod.rowwise() += bd;
    detail::MapRow<S>(out.data() + static_cast<std::int64_t>(r0) * ow * cout,
                      static_cast<Eigen::Index>(rows), cout) = prod.template cast<S>();
  });
  return out;
}

template <class S>
Tensor<S> relu(const Tensor<S>& input) {
  Tensor<S> out = input;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::max<S>(S(0), out[i]);
  return out;
}

/// Channel-wise parametric relu over an HWC tensor; slopes [C].
template <class S>
Tensor<S> prelu(const Tensor<S>& input, const Tensor<S>& slopes) {
  if (input.rank() != 3 || slopes.rank() != 1 || slopes.dim(0) != input.dim(2))
    throw ShapeError("prelu expects HWC input and per-channel slopes, got " +
                     shape_string(input.shape()) + " / " + shape_string(slopes.shape()));
  Tensor<S> out = input;
  const int c = input.dim(2);
  for (std::int64_t i = 0; i < out.size(); ++i)
    if (out[i] < S(0)) out[i] *= slopes[i % c];
  return out;
}

/// Per-channel window maximum. H' = floor((H - support) / stride) + 1.
template <class S>
Tensor<S> maxpool2d(const Tensor<S>& input, int support, int stride) {
  if (input.rank() != 3)
    throw ShapeError("maxpool2d input must be rank-3 HWC, got " + shape_string(input.shape()));
  if (support < 1 || stride < 1) throw ValueError("maxpool2d support and stride must be >= 1");
  const int h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (support > h || support > w)
    throw ShapeError("maxpool2d window " + std::to_string(support) + " larger than input " +
                     shape_string(input.shape()));
  const int oh = (h - support) / stride + 1;
  const int ow = (w - support) / stride + 1;
  Tensor<S> out({oh, ow, c}, std::numeric_limits<S>::lowest());
  for (int r = 0; r < oh; ++r) {
    for (int col = 0; col < ow; ++col) {
      S* dst = &out(r, col, 0);
      for (int ky = 0; ky < support; ++ky) {
        for (int kx = 0; kx < support; ++kx) {
          const S* src = &input(r * stride + ky, col * stride + kx, 0);
          for (int ch = 0; ch < c; ++ch) dst[ch] = std::max(dst[ch], src[ch]);
        }
      }
    }
  }
  return out;
}

/// Numerically stable softmax over a rank-1 tensor.
template <class S>
Tensor<S> softmax(const Tensor<S>& logits) {
  if (logits.rank() != 1)
    throw ShapeError("softmax expects a rank-1 tensor, got " + shape_string(logits.shape()));
  double peak = -std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(static_cast<double>(logits[i])))
      throw ValueError("softmax input must be finite");
    peak = std::max(peak, static_cast<double>(logits[i]));
  }
  Tensor<S> out(logits.shape());
  double sum = 0;
  for (std::int64_t i = 0; i < logits.size(); ++i)
    sum += std::exp(static_cast<double>(logits[i]) - peak);
  for (std::int64_t i = 0; i < logits.size(); ++i)
    out[i] = static_cast<S>(std::exp(static_cast<double>(logits[i]) - peak) / sum);
  return out;
}

/// Inverted dropout: in train mode each value is zeroed with probability
/// rate and survivors are scaled by 1/(1-rate); eval mode is the identity.
template <class S>
Tensor<S> dropout(const Tensor<S>& input, double rate, Mode mode, Rng* rng = nullptr) {
  if (rate < 0 || rate >= 1) throw ValueError("dropout rate must be in [0, 1)");
  if (mode == Mode::Eval || rate == 0) return input;
  if (!rng) throw ValueError("dropout in train mode needs an rng");
  Tensor<S> out = input;
  const S scale = static_cast<S>(1.0 / (1.0 - rate));
  for (std::int64_t i = 0; i < out.size(); ++i)
    out[i] = rng->uniform() < rate ? S(0) : out[i] * scale;
  return out;
}

/// Fully connected layer: input flattened to [N], weights [N,M], bias [M].
template <class S>
Tensor<S> dense(const Tensor<S>& input, const Tensor<S>& weights, const Tensor<S>& bias) {
  if (weights.rank() != 2)
    throw ShapeError("dense weights must be rank-2 [in,out], got " +
                     shape_string(weights.shape()));
  const int n = weights.dim(0), m = weights.dim(1);
  if (input.size() != n)
    throw ShapeError("dense input size " + shape_string(input.shape()) + " does not match weights " +
                     shape_string(weights.shape()));
  if (bias.rank() != 1 || bias.dim(0) != m)
    throw ShapeError("dense bias must be [out]=" + std::to_string(m) + ", got " +
                     shape_string(bias.shape()));
  Eigen::RowVectorXd x =
      Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(input.data(), n).template cast<double>();
  Eigen::MatrixXd wd = detail::MapRowConst<S>(weights.data(), n, m).template cast<double>();
  Eigen::RowVectorXd y = x * wd;
  Tensor<S> out({m});
  for (int j = 0; j < m; ++j)
    out[j] = static_cast<S>(y(j) + static_cast<double>(bias[j]));
  return out;
}

template <class S>
Tensor<S> flatten(const Tensor<S>& input) {
  return input.reshaped({static_cast<int>(input.size())});
}

}  // namespace cage
