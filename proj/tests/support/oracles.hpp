#pragma once

// Independent reference implementations the test suites check the library
// against. Everything here is deliberately written the slow, obvious way
// and shares no code with the implementations under test.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cage/geometry.hpp"
#include "cage/tensor.hpp"

namespace oracle {

/// Six-nested-loop cross-correlation with zero padding, double accumulation.
cage::Tensorf conv2d_ref(const cage::Tensorf& input, const cage::Tensorf& weights,
                         const cage::Tensorf& bias, int stride, int pad);

cage::Tensorf maxpool2d_ref(const cage::Tensorf& input, int support, int stride);

/// Greedy NMS by repeated linear scan for the best unsuppressed box
/// (no sorting), O(n^2) throughout.
std::vector<cage::BoundingBox> nms_ref(const std::vector<cage::BoundingBox>& boxes,
                                       float threshold, cage::IouMode mode);

/// Central finite differences of loss() w.r.t. every entry of every tensor
/// in params. loss() must read the current parameter values each call.
std::map<std::string, cage::Tensord> finite_difference_gradients(
    std::map<std::string, cage::Tensord>& params, const std::function<double()>& loss,
    double h = 1e-3);

struct TallyReport {
  double precision[8], recall[8], f1[8];
  long long support[8];
  double accuracy = 0;
  double one_off = 0;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
  long long confusion[8][8];
};

/// Brute-force per-class tally over the label arrays.
TallyReport tally_ref(const std::vector<int>& preds, const std::vector<int>& truths);

inline double rel_err(double got, double want) {
  const double scale = std::max({1.0, std::abs(got), std::abs(want)});
  return std::abs(got - want) / scale;
}

}  // namespace oracle
