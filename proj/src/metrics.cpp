#include "cage/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "cage/errors.hpp"

namespace cage {

namespace {

void check_labels(const std::vector<int>& preds, const std::vector<int>& truths) {
  if (preds.empty()) throw DataError("no samples to evaluate");
  if (preds.size() != truths.size())
    throw ShapeError("prediction and truth counts differ: " + std::to_string(preds.size()) +
                     " vs " + std::to_string(truths.size()));
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] < 0 || preds[i] >= kNumAgeClasses || truths[i] < 0 || truths[i] >= kNumAgeClasses)
      throw DataError("label out of range at sample " + std::to_string(i));
}

}  // namespace

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (const auto& row : counts)
    for (std::int64_t c : row) n += c;
  return n;
}

std::int64_t ConfusionMatrix::row_sum(int true_class) const {
  std::int64_t n = 0;
  for (std::int64_t c : counts[static_cast<std::size_t>(true_class)]) n += c;
  return n;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t n = 0;
  for (int i = 0; i < kNumAgeClasses; ++i)
    n += counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
  return n;
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truths) {
  check_labels(preds, truths);
  ConfusionMatrix matrix;
  for (std::size_t i = 0; i < preds.size(); ++i)
    matrix.counts[static_cast<std::size_t>(truths[i])][static_cast<std::size_t>(preds[i])]++;
  return matrix;
}

std::array<std::array<double, kNumAgeClasses>, kNumAgeClasses> normalize(
    const ConfusionMatrix& matrix) {
  std::array<std::array<double, kNumAgeClasses>, kNumAgeClasses> out{};
  for (int t = 0; t < kNumAgeClasses; ++t) {
    const auto row_total = matrix.row_sum(t);
    if (row_total == 0) continue;
    for (int p = 0; p < kNumAgeClasses; ++p)
      out[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] =
          static_cast<double>(matrix.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]) /
          static_cast<double>(row_total);
  }
  return out;
}

double exact_accuracy(const std::vector<int>& preds, const std::vector<int>& truths) {
  check_labels(preds, truths);
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == truths[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double one_off_accuracy(const std::vector<int>& preds, const std::vector<int>& truths) {
  check_labels(preds, truths);
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (std::abs(preds[i] - truths[i]) <= 1) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

ClassReport classification_report(const std::vector<int>& preds, const std::vector<int>& truths) {
  const ConfusionMatrix matrix = confusion(preds, truths);
  ClassReport report;
  const auto total = matrix.total();
  double macro_p = 0, macro_r = 0, macro_f = 0;
  double weighted_p = 0, weighted_r = 0, weighted_f = 0;
  for (int c = 0; c < kNumAgeClasses; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    std::int64_t tp = matrix.counts[ci][ci];
    std::int64_t fp = 0, fn = 0;
    for (int o = 0; o < kNumAgeClasses; ++o) {
      if (o == c) continue;
      fp += matrix.counts[static_cast<std::size_t>(o)][ci];
      fn += matrix.counts[ci][static_cast<std::size_t>(o)];
    }
    ClassStats& stats = report.per_class[ci];
    stats.support = matrix.row_sum(c);
    if (tp + fp == 0 || tp + fn == 0) report.zero_denominator_seen = true;
    stats.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    stats.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    stats.f1 = stats.precision + stats.recall == 0
                   ? 0.0
                   : 2.0 * stats.precision * stats.recall / (stats.precision + stats.recall);
    macro_p += stats.precision;
    macro_r += stats.recall;
    macro_f += stats.f1;
    const double w = static_cast<double>(stats.support) / static_cast<double>(total);
    weighted_p += w * stats.precision;
    weighted_r += w * stats.recall;
    weighted_f += w * stats.f1;
  }
  report.accuracy = static_cast<double>(matrix.trace()) / static_cast<double>(total);
  report.macro = {macro_p / kNumAgeClasses, macro_r / kNumAgeClasses, macro_f / kNumAgeClasses,
                  total};
  report.weighted = {weighted_p, weighted_r, weighted_f, total};
  return report;
}

std::string render_report(const ClassReport& report) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%12s %10s %10s %10s %10s\n", "", "precision", "recall",
                "f1-score", "support");
  out << buf;
  for (int c = 0; c < kNumAgeClasses; ++c) {
    const ClassStats& s = report.per_class[static_cast<std::size_t>(c)];
    std::snprintf(buf, sizeof buf, "%12s %10.2f %10.2f %10.2f %10lld\n",
                  age_class_labels()[static_cast<std::size_t>(c)].c_str(), s.precision, s.recall,
                  s.f1, static_cast<long long>(s.support));
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "\n%12s %10s %10s %10.2f %10lld\n", "accuracy", "", "",
                report.accuracy, static_cast<long long>(report.macro.support));
  out << buf;
  std::snprintf(buf, sizeof buf, "%12s %10.2f %10.2f %10.2f %10lld\n", "macro avg",
                report.macro.precision, report.macro.recall, report.macro.f1,
                static_cast<long long>(report.macro.support));
  out << buf;
  std::snprintf(buf, sizeof buf, "%12s %10.2f %10.2f %10.2f %10lld\n", "weighted avg",
                report.weighted.precision, report.weighted.recall, report.weighted.f1,
                static_cast<long long>(report.weighted.support));
  out << buf;
  return out.str();
}

std::string render_confusion(const ConfusionMatrix& matrix) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%8s", "");
  out << buf;
  for (int p = 0; p < kNumAgeClasses; ++p) {
    std::snprintf(buf, sizeof buf, " %7s", age_class_labels()[static_cast<std::size_t>(p)].c_str());
    out << buf;
  }
  out << '\n';
  for (int t = 0; t < kNumAgeClasses; ++t) {
    std::snprintf(buf, sizeof buf, "%8s", age_class_labels()[static_cast<std::size_t>(t)].c_str());
    out << buf;
    for (int p = 0; p < kNumAgeClasses; ++p) {
      std::snprintf(buf, sizeof buf, " %7lld",
                    static_cast<long long>(
                        matrix.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]));
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string render_normalized_confusion(const ConfusionMatrix& matrix) {
  const auto rows = normalize(matrix);
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%8s", "");
  out << buf;
  for (int p = 0; p < kNumAgeClasses; ++p) {
    std::snprintf(buf, sizeof buf, " %7s", age_class_labels()[static_cast<std::size_t>(p)].c_str());
    out << buf;
  }
  out << '\n';
  for (int t = 0; t < kNumAgeClasses; ++t) {
    std::snprintf(buf, sizeof buf, "%8s", age_class_labels()[static_cast<std::size_t>(t)].c_str());
    out << buf;
    for (int p = 0; p < kNumAgeClasses; ++p) {
      std::snprintf(buf, sizeof buf, " %7.4f",
                    rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string render_metrics_tsv(const ClassReport& report, double one_off,
                               const ConfusionMatrix& matrix) {
  std::ostringstream out;
  char buf[64];
  auto emit = [&](const char* key, double value) {
    std::snprintf(buf, sizeof buf, "%s\t%.6f\n", key, value);
    out << buf;
  };
  emit("exact_accuracy", report.accuracy);
  emit("one_off_accuracy", one_off);
  for (int c = 0; c < kNumAgeClasses; ++c) {
    const ClassStats& s = report.per_class[static_cast<std::size_t>(c)];
    std::snprintf(buf, sizeof buf, "class\t%s\t%.6f\t%.6f\t%.6f\t%lld\n",
                  age_class_labels()[static_cast<std::size_t>(c)].c_str(), s.precision, s.recall,
                  s.f1, static_cast<long long>(s.support));
    out << buf;
  }
  emit("macro_precision", report.macro.precision);
  emit("macro_recall", report.macro.recall);
  emit("macro_f1", report.macro.f1);
  emit("weighted_precision", report.weighted.precision);
  emit("weighted_recall", report.weighted.recall);
  emit("weighted_f1", report.weighted.f1);
  for (int t = 0; t < kNumAgeClasses; ++t) {
    out << "confusion";
    for (int p = 0; p < kNumAgeClasses; ++p)
      out << '\t'
          << matrix.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    out << '\n';
  }
  return out.str();
}

}  // namespace cage
