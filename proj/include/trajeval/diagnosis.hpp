#pragma once

// Stage 2: per-subtask diagnosis producing a verdict, an error analysis and step-level fixes.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajeval/chat.hpp"
#include "trajeval/extract.hpp"
#include "trajeval/images.hpp"
#include "trajeval/prompts.hpp"
#include "trajeval/retry.hpp"
#include "trajeval/segmentation.hpp"
#include "trajeval/trajectory.hpp"

namespace trajeval {

enum class Verdict { success, partial, fail };

std::string_view to_string(Verdict v);
/// Case-insensitive, accepts common synonyms ("succeeded", "partially", "failed", ...).
std::optional<Verdict> parse_verdict(std::string_view text);

struct StepIssue {
  std::size_t step_index = 1;  // global, 1-based
  std::string problem;
  std::string root_cause;
  std::string suggested_fix;
  bool clamped = false;

  friend bool operator==(const StepIssue&, const StepIssue&) = default;
};

struct SubtaskDiagnosis {
  std::size_t subtask_index = 1;
  Verdict verdict = Verdict::fail;
  std::string reasoning;
  std::string error_analysis;
  std::vector<StepIssue> issues;
  bool repaired = false;
  bool evaluator_error = false;
  std::size_t images_sent = 0;
  std::size_t missing_screenshots = 0;

  friend bool operator==(const SubtaskDiagnosis&, const SubtaskDiagnosis&) = default;
};

/// Binary per-subtask verdict without error analysis (used when diagnosis is ablated).
struct SubtaskVerdict {
  std::size_t subtask_index = 1;
  bool success = false;
  std::string reasoning;
  bool repaired = false;
  bool evaluator_error = false;

  friend bool operator==(const SubtaskVerdict&, const SubtaskVerdict&) = default;
};

/// A request plus bookkeeping about the screenshots it could and could not attach.
struct BuiltRequest {
  ChatRequest request;
  std::size_t images_sent = 0;
  std::size_t missing_screenshots = 0;
};

/// Lists every subtask, marking `current` (1-based).
std::string render_subtask_list(const Segmentation& seg, std::size_t current);
/// "Step j: <action>" for the subtask's steps, using global step numbers.
std::string render_segment_actions(const Trajectory& tr, const SubtaskSpec& span);

/// Request for subtask `i` (1-based). Parts, in order: rendered instruction/subtask list/actions,
/// the pre-subtask screen when available, each step's screen or a placeholder, and the final screen.
BuiltRequest build_diagnosis_request(const TaskInstance& task, const Segmentation& seg, std::size_t i,
                                     const PromptSet& prompts, const ImageLoader& images,
                                     std::string_view template_name = prompt_names::kDiagnose);

/// Validates a diagnosis record for the given span. Throws SchemaViolation.
SubtaskDiagnosis diagnosis_from_record(const Record& rec, const SubtaskSpec& span);
SubtaskVerdict verdict_from_record(const Record& rec, std::size_t subtask_index);

struct DiagnosisOutcome {
  SubtaskDiagnosis diagnosis;
  AttemptStats stats;
};

/// Propagates RetriesExhausted.
DiagnosisOutcome diagnose_subtask(const TaskInstance& task, const Segmentation& seg, std::size_t i,
                                  Backend& backend, const CallOptions& call, const PromptSet& prompts,
                                  const ImageLoader& images);

/// Synthetic fail diagnosis recorded when a subtask could not be evaluated.
SubtaskDiagnosis evaluator_error_diagnosis(std::size_t subtask_index, const std::string& what);

struct DiagnosesOutcome {
  std::vector<SubtaskDiagnosis> diagnoses;
  AttemptStats stats;
};

/// One diagnosis per subtask in subtask order. Exhausted retries become evaluator-error entries.
DiagnosesOutcome diagnose_all(const TaskInstance& task, const Segmentation& seg, Backend& backend,
                              const CallOptions& call, const PromptSet& prompts, const ImageLoader& images,
                              std::size_t parallelism = 1);

struct VerdictsOutcome {
  std::vector<SubtaskVerdict> verdicts;
  AttemptStats stats;
  std::size_t images_sent = 0;
  std::size_t missing_screenshots = 0;
};

/// Binary verdict per subtask, same ordering and degradation rules as diagnose_all.
VerdictsOutcome verdict_all(const TaskInstance& task, const Segmentation& seg, Backend& backend,
                            const CallOptions& call, const PromptSet& prompts, const ImageLoader& images,
                            std::size_t parallelism = 1);

nlohmann::ordered_json to_json(const SubtaskDiagnosis& d);
SubtaskDiagnosis diagnosis_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const SubtaskVerdict& v);
SubtaskVerdict subtask_verdict_from_json(const nlohmann::ordered_json& j);

}  // namespace trajeval
