#pragma once

// Stage 3: task-level verdict from the per-subtask evidence.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajeval/diagnosis.hpp"
#include "trajeval/extract.hpp"
#include "trajeval/prompts.hpp"
#include "trajeval/retry.hpp"
#include "trajeval/segmentation.hpp"
#include "trajeval/trajectory.hpp"

namespace trajeval {

enum class DerivedFrom { model_summary, hard_rule, naive_call, baseline };

std::string_view to_string(DerivedFrom d);
std::optional<DerivedFrom> derived_from_string(std::string_view s);

struct FinalVerdict {
  bool success = false;
  std::string justification;
  std::string reasoning;
  DerivedFrom derived_from = DerivedFrom::model_summary;
  /// Set when the model summary was replaced by the hard rule after exhausted retries.
  bool fallback = false;

  friend bool operator==(const FinalVerdict&, const FinalVerdict&) = default;
};

/// Success iff every verdict is success; partial counts as non-success.
FinalVerdict aggregate_hard_rule(const std::vector<Verdict>& verdicts);
FinalVerdict aggregate_hard_rule(const std::vector<SubtaskDiagnosis>& diagnoses);
FinalVerdict aggregate_hard_rule(const std::vector<SubtaskVerdict>& verdicts);

/// Parses {reasoning, success: boolean, justification}. `success` must be a JSON boolean.
/// Throws SchemaViolation.
FinalVerdict final_verdict_from_record(const Record& rec, DerivedFrom derived_from);

/// Primary evidence: every diagnosis with its reasoning trace and step-level issues.
std::string render_diagnostic_evidence(const std::vector<SubtaskDiagnosis>& diagnoses);
std::string render_verdict_evidence(const std::vector<SubtaskVerdict>& verdicts);
/// Secondary reference: subtask descriptions with their spans and verdicts.
std::string render_subtask_summaries(const Segmentation& seg, const std::vector<std::string>& verdict_labels);

ChatRequest build_summary_request(const TaskInstance& task, const Segmentation& seg,
                                  const std::vector<SubtaskDiagnosis>& diagnoses, const PromptSet& prompts);
ChatRequest build_summary_request(const TaskInstance& task, const Segmentation& seg,
                                  const std::vector<SubtaskVerdict>& verdicts, const PromptSet& prompts);

struct SummaryOutcome {
  FinalVerdict verdict;
  AttemptStats stats;
};

/// Model summary; falls back to the hard rule (flagged) when retries are exhausted.
SummaryOutcome summarize(const TaskInstance& task, const Segmentation& seg,
                         const std::vector<SubtaskDiagnosis>& diagnoses, Backend& backend, const CallOptions& call,
                         const PromptSet& prompts);
SummaryOutcome summarize(const TaskInstance& task, const Segmentation& seg, const std::vector<SubtaskVerdict>& verdicts,
                         Backend& backend, const CallOptions& call, const PromptSet& prompts);

nlohmann::ordered_json to_json(const FinalVerdict& v);
FinalVerdict final_verdict_from_json(const nlohmann::ordered_json& j);

}  // namespace trajeval
