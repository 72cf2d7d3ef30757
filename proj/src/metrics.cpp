#include "trajeval/metrics.hpp"

#include <cstdio>
#include <map>
#include <stdexcept>

namespace trajeval {

double f1_from(double precision, double recall) {
  if (precision + recall <= 0) return 0;
  return 2 * precision * recall / (precision + recall);
}

MetricsSummary metrics_from_matrix(const ConfusionMatrix& m) {
  MetricsSummary s;
  s.matrix = m;
  const auto total = m.total();
  if (total == 0) throw std::invalid_argument("metrics over zero pairs");
  s.accuracy = 100.0 * static_cast<double>(m.tp + m.tn) / static_cast<double>(total);
  if (m.tp + m.fp > 0) {
    s.precision = 100.0 * static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  } else {
    s.warnings.emplace_back("no positive predictions: precision set to 0");
  }
  if (m.tp + m.fn > 0) {
    s.recall = 100.0 * static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  } else {
    s.warnings.emplace_back("no positive gold labels: recall set to 0");
  }
  s.f1 = f1_from(s.precision, s.recall);
  if (s.precision + s.recall <= 0) s.warnings.emplace_back("precision and recall are 0: F1 set to 0");
  return s;
}

MetricsSummary compute_metrics(const std::vector<PredictionPair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("compute_metrics: empty input");
  ConfusionMatrix m;
  for (const auto& p : pairs) {
    if (p.predicted && p.gold) ++m.tp;
    else if (p.predicted) ++m.fp;
    else if (p.gold) ++m.fn;
    else ++m.tn;
  }
  return metrics_from_matrix(m);
}

LengthGroup group_of_length(std::size_t n) {
  if (n < 1) throw std::invalid_argument("trajectory length must be >= 1");
  if (n < 10) return LengthGroup::lt10;
  if (n < 20) return LengthGroup::g10_20;
  if (n < 30) return LengthGroup::g20_30;
  if (n < 40) return LengthGroup::g30_40;
  if (n < 50) return LengthGroup::g40_50;
  if (n <= 80) return LengthGroup::g50_80;
  return LengthGroup::overflow;
}

std::string_view to_string(LengthGroup g) {
  switch (g) {
    case LengthGroup::lt10: return "lt10";
    case LengthGroup::g10_20: return "g10_20";
    case LengthGroup::g20_30: return "g20_30";
    case LengthGroup::g30_40: return "g30_40";
    case LengthGroup::g40_50: return "g40_50";
    case LengthGroup::g50_80: return "g50_80";
    case LengthGroup::overflow: return "overflow";
  }
  return "overflow";
}

std::string_view group_label(LengthGroup g) {
  switch (g) {
    case LengthGroup::lt10: return "<10";
    case LengthGroup::g10_20: return "10-20";
    case LengthGroup::g20_30: return "20-30";
    case LengthGroup::g30_40: return "30-40";
    case LengthGroup::g40_50: return "40-50";
    case LengthGroup::g50_80: return "50-80";
    case LengthGroup::overflow: return ">80";
  }
  return ">80";
}

std::optional<LengthGroup> length_group_from_string(std::string_view s) {
  for (auto g : kLengthGroups) {
    if (to_string(g) == s) return g;
  }
  if (s == "overflow") return LengthGroup::overflow;
  return std::nullopt;
}

KappaResult cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cohen_kappa: label vectors differ in length");
  if (a.empty()) throw std::invalid_argument("cohen_kappa: empty input");
  const double n = static_cast<double>(a.size());
  std::map<std::string, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) ++agree;
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
  }
  KappaResult r;
  r.observed = static_cast<double>(agree) / n;
  for (const auto& [label, counts] : marginals) {
    r.expected += (static_cast<double>(counts.first) / n) * (static_cast<double>(counts.second) / n);
  }
  if (r.expected >= 1.0) {
    r.degenerate = true;
    r.kappa = r.observed >= 1.0 ? 1.0 : 0.0;
    return r;
  }
  r.kappa = (r.observed - r.expected) / (1.0 - r.expected);
  return r;
}

KappaResult cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
  std::vector<std::string> sa, sb;
  sa.reserve(a.size());
  sb.reserve(b.size());
  for (bool v : a) sa.emplace_back(v ? "1" : "0");
  for (bool v : b) sb.emplace_back(v ? "1" : "0");
  return cohen_kappa(sa, sb);
}

std::string format_pct(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace trajeval
