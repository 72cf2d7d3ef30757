#include "trajeval/meta_eval.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "trajeval/errors.hpp"

namespace trajeval {
using nlohmann::ordered_json;

GroupTable metrics_by_group(const std::vector<EvaluationReport>& reports, const Dataset& dataset,
                            const MetaEvalOptions& options) {
  GroupTable table;
  std::map<LengthGroup, std::vector<PredictionPair>> by_group;
  std::vector<PredictionPair> all;
  for (const auto& r : reports) {
    const TaskInstance* task = dataset.find(r.task_id);
    if (!task) throw DatasetError("report for unknown task_id '" + r.task_id + "'");
    if (!task->gold_label) {
      ++table.missing_gold;
      continue;
    }
    if (options.exclude_errors && r.flags.evaluator_error) {
      ++table.excluded_errors;
      continue;
    }
    const PredictionPair p{r.final.success, *task->gold_label};
    by_group[group_of_length(task->trajectory.length())].push_back(p);
    all.push_back(p);
  }
  if (all.empty()) throw std::invalid_argument("no scorable reports");
  table.scored = all.size();
  table.overall = compute_metrics(all);
  for (auto g : kLengthGroups) {
    auto it = by_group.find(g);
    if (it == by_group.end()) {
      table.notes.push_back("group " + std::string(group_label(g)) + " has no items");
      continue;
    }
    table.rows.emplace_back(g, compute_metrics(it->second));
  }
  if (auto it = by_group.find(LengthGroup::overflow); it != by_group.end()) {
    table.rows.emplace_back(LengthGroup::overflow, compute_metrics(it->second));
    table.notes.push_back(std::to_string(it->second.size()) + " items longer than 80 steps reported as overflow");
  }
  if (table.missing_gold) table.notes.push_back(std::to_string(table.missing_gold) + " reports excluded: no gold label");
  if (table.excluded_errors) {
    table.notes.push_back(std::to_string(table.excluded_errors) + " reports excluded: evaluator error");
  }
  return table;
}

ordered_json to_json(const MetricsSummary& m) {
  return {{"tp", m.matrix.tp},         {"fp", m.matrix.fp},   {"fn", m.matrix.fn},
          {"tn", m.matrix.tn},         {"n", m.matrix.total()}, {"accuracy", m.accuracy},
          {"precision", m.precision},  {"recall", m.recall},  {"f1", m.f1},
          {"warnings", m.warnings}};
}

ordered_json to_json(const GroupTable& t) {
  ordered_json groups = ordered_json::object();
  for (const auto& [g, m] : t.rows) groups[std::string(to_string(g))] = to_json(m);
  return {{"overall", to_json(t.overall)},
          {"groups", std::move(groups)},
          {"scored", t.scored},
          {"missing_gold", t.missing_gold},
          {"excluded_errors", t.excluded_errors},
          {"notes", t.notes}};
}

namespace {

std::string row(const std::string& label, const MetricsSummary& m, bool precision_only) {
  char buf[160];
  if (precision_only) {
    std::snprintf(buf, sizeof buf, "%-10s %6zu %8s", label.c_str(), m.matrix.total(), format_pct(m.precision).c_str());
  } else {
    std::snprintf(buf, sizeof buf, "%-10s %6zu %8s %8s %8s %8s", label.c_str(), m.matrix.total(),
                  format_pct(m.accuracy).c_str(), format_pct(m.precision).c_str(), format_pct(m.recall).c_str(),
                  format_pct(m.f1).c_str());
  }
  return buf;
}

}  // namespace

std::string render_metrics_table(const GroupTable& t, bool by_length, bool precision_only) {
  std::ostringstream out;
  char header[160];
  if (precision_only) {
    std::snprintf(header, sizeof header, "%-10s %6s %8s", "Group", "N", "P");
  } else {
    std::snprintf(header, sizeof header, "%-10s %6s %8s %8s %8s %8s", "Group", "N", "Acc", "P", "R", "F1");
  }
  out << header << '\n' << row("overall", t.overall, precision_only) << '\n';
  if (by_length) {
    for (const auto& [g, m] : t.rows) out << row(std::string(group_label(g)), m, precision_only) << '\n';
  }
  for (const auto& note : t.notes) out << "note: " << note << '\n';
  return out.str();
}

}  // namespace trajeval
