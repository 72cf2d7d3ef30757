#pragma once

// Meta-evaluation: scoring evaluator predictions against gold labels.
// Task success is the positive class throughout.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trajeval {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// All four metrics are percentages in [0, 100], kept at full precision.
struct MetricsSummary {
  ConfusionMatrix matrix;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::vector<std::string> warnings;
};

struct PredictionPair {
  bool predicted;
  bool gold;
};

/// Throws std::invalid_argument on an empty list.
MetricsSummary compute_metrics(const std::vector<PredictionPair>& pairs);

/// Metrics from a confusion matrix. Undefined precision/recall (zero denominator) are reported
/// as 0 with a warning.
MetricsSummary metrics_from_matrix(const ConfusionMatrix& m);

/// Harmonic mean of two percentages; 0 when both are 0.
double f1_from(double precision, double recall);

enum class LengthGroup { lt10, g10_20, g20_30, g30_40, g40_50, g50_80, overflow };

inline constexpr std::array<LengthGroup, 6> kLengthGroups = {
    LengthGroup::lt10,   LengthGroup::g10_20, LengthGroup::g20_30,
    LengthGroup::g30_40, LengthGroup::g40_50, LengthGroup::g50_80};

/// Bins are [1,10), [10,20), [20,30), [30,40), [40,50), [50,80]; above 80 is overflow.
/// Throws std::invalid_argument for n < 1.
LengthGroup group_of_length(std::size_t n);

std::string_view to_string(LengthGroup g);
/// Human label, e.g. "10-20".
std::string_view group_label(LengthGroup g);
std::optional<LengthGroup> length_group_from_string(std::string_view s);

struct KappaResult {
  double kappa = 0;
  double observed = 0;  // p_o
  double expected = 0;  // p_e
  bool degenerate = false;
};

/// Cohen's kappa between two raters. Throws std::invalid_argument on empty or mismatched input.
KappaResult cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b);
KappaResult cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b);

/// Formats a percentage with two decimals.
std::string format_pct(double v, int decimals = 2);

}  // namespace trajeval
