#pragma once

// Scoring evaluation reports against the dataset's gold labels.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajeval/metrics.hpp"
#include "trajeval/report.hpp"
#include "trajeval/trajectory.hpp"

namespace trajeval {

struct MetaEvalOptions {
  /// Drop reports flagged evaluator_error before scoring.
  bool exclude_errors = false;
};

struct GroupTable {
  std::vector<std::pair<LengthGroup, MetricsSummary>> rows;  // non-empty groups in bin order
  MetricsSummary overall;
  std::size_t scored = 0;
  std::size_t missing_gold = 0;
  std::size_t excluded_errors = 0;
  std::vector<std::string> notes;
};

/// Throws DatasetError when a report's task_id is not in the dataset and std::invalid_argument
/// when nothing remains to score.
GroupTable metrics_by_group(const std::vector<EvaluationReport>& reports, const Dataset& dataset,
                            const MetaEvalOptions& options = {});

nlohmann::ordered_json to_json(const MetricsSummary& m);
nlohmann::ordered_json to_json(const GroupTable& t);

/// Plain-text table: overall row, then one row per length group when `by_length` is set.
std::string render_metrics_table(const GroupTable& t, bool by_length, bool precision_only = false);

}  // namespace trajeval
