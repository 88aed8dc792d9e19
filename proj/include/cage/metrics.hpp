#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cage/network.hpp"

namespace cage {

/// Rows are true labels, columns are predicted labels.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumAgeClasses>, kNumAgeClasses> counts{};

  std::int64_t total() const;
  std::int64_t row_sum(int true_class) const;
  std::int64_t trace() const;
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truths);

/// Row-stochastic normalization; all-zero rows stay zero.
std::array<std::array<double, kNumAgeClasses>, kNumAgeClasses> normalize(
    const ConfusionMatrix& matrix);

double exact_accuracy(const std::vector<int>& preds, const std::vector<int>& truths);

/// Fraction of samples whose predicted class index is within one of the
/// true index in the fixed age-class order.
double one_off_accuracy(const std::vector<int>& preds, const std::vector<int>& truths);

struct ClassStats {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::int64_t support = 0;
};

struct ClassReport {
  std::array<ClassStats, kNumAgeClasses> per_class{};
  double accuracy = 0;
  ClassStats macro{};     // unweighted means; support is the total
  ClassStats weighted{};  // support-weighted means
  bool zero_denominator_seen = false;  // some class had an empty precision/recall denominator
};

ClassReport classification_report(const std::vector<int>& preds, const std::vector<int>& truths);

/// Aligned plain-text report, per-class rows at two decimals.
std::string render_report(const ClassReport& report);
std::string render_confusion(const ConfusionMatrix& matrix);
std::string render_normalized_confusion(const ConfusionMatrix& matrix);

/// Machine-readable metrics: `key<TAB>value...` lines.
std::string render_metrics_tsv(const ClassReport& report, double one_off,
                               const ConfusionMatrix& matrix);

}  // namespace cage
