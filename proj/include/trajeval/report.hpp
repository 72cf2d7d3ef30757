#pragma once

// Machine-readable evaluation report: one record per task.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajeval/diagnosis.hpp"
#include "trajeval/retry.hpp"
#include "trajeval/segmentation.hpp"
#include "trajeval/summary.hpp"

namespace trajeval {

enum class Variant { full, naive, no_seg, no_diag, no_sum, agenttrek_baseline };

std::string_view to_string(Variant v);
std::optional<Variant> variant_from_string(std::string_view s);

struct StageStats {
  int attempts = 0;
  long long elapsed_ms = 0;
  long long input_tokens = 0;
  long long output_tokens = 0;

  static StageStats from(const AttemptStats& s);
  friend bool operator==(const StageStats&, const StageStats&) = default;
};

struct ReportFlags {
  bool images_available = false;  // the trajectory references at least one screenshot
  bool text_only = false;         // no image part was sent to any stage
  std::size_t missing_screenshots = 0;
  bool segmentation_repaired = false;
  bool segmentation_fallback = false;
  bool diagnoses_repaired = false;
  bool summary_fallback = false;
  bool evaluator_error = false;

  friend bool operator==(const ReportFlags&, const ReportFlags&) = default;
};

struct Provenance {
  std::string config_fingerprint;
  std::map<std::string, std::string> prompt_hashes;
  std::string backend;
  unsigned long long seed = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct EvaluationReport {
  std::string task_id;
  std::string instruction;
  Variant variant = Variant::full;
  std::size_t trajectory_length = 0;
  std::optional<Segmentation> segmentation;
  std::optional<std::vector<SubtaskDiagnosis>> diagnoses;
  std::optional<std::vector<SubtaskVerdict>> subtask_verdicts;
  FinalVerdict final;
  std::map<std::string, StageStats> stages;
  ReportFlags flags;
  Provenance provenance;
  std::vector<std::string> notes;
};

/// Presence rules per variant. Throws std::invalid_argument.
void validate_report(const EvaluationReport& r);

nlohmann::ordered_json to_json(const EvaluationReport& r);
EvaluationReport report_from_json(const nlohmann::ordered_json& j);

/// Reads a line-delimited report file. Throws Error naming the bad line.
std::vector<EvaluationReport> load_reports(const std::string& path);

}  // namespace trajeval
