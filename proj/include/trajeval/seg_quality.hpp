#pragma once

// Independent model-based rating of segment quality on a 1-5 rubric.

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajeval/extract.hpp"
#include "trajeval/images.hpp"
#include "trajeval/metrics.hpp"
#include "trajeval/prompts.hpp"
#include "trajeval/retry.hpp"
#include "trajeval/segmentation.hpp"
#include "trajeval/trajectory.hpp"

namespace trajeval {

inline constexpr int kUsableThreshold = 4;

/// "<task_id>#<subtask index>"
std::string subtask_ref(const std::string& task_id, std::size_t subtask_index);

struct SegQualityScore {
  std::string task_id;
  std::size_t subtask_index = 1;
  int score = 0;  // 1..5; 0 only for evaluator-error entries
  std::string coherence_notes;
  std::string alignment_notes;
  bool usable = false;  // score >= 4
  bool repaired = false;
  bool evaluator_error = false;

  std::string ref() const { return subtask_ref(task_id, subtask_index); }
};

/// Parses {coherence_notes, alignment_notes, score}; out-of-range scores are clamped to 1..5.
/// Throws SchemaViolation when the score is missing or not numeric.
SegQualityScore seg_quality_from_record(const Record& rec, const std::string& task_id, std::size_t subtask_index);

/// Subtask description, step range, actions, neighbouring subtasks, and the segment's screenshots.
ChatRequest build_seg_quality_request(const TaskInstance& task, const Segmentation& seg, std::size_t i,
                                      const PromptSet& prompts, const ImageLoader& images);

/// Exhausted retries yield an entry flagged evaluator_error.
SegQualityScore score_subtask(const TaskInstance& task, const Segmentation& seg, std::size_t i, Backend& backend,
                              const CallOptions& call, const PromptSet& prompts, const ImageLoader& images,
                              AttemptStats* stats = nullptr);

struct ScoreDistribution {
  std::array<std::size_t, 5> counts{};  // counts[s - 1]
  std::size_t total = 0;                // scored entries, evaluator errors excluded
  std::size_t excluded_errors = 0;
  std::array<double, 5> percent{};      // full precision
  double usable_pct = 0;
};

/// Throws std::invalid_argument when no valid score is present.
ScoreDistribution score_distribution(const std::vector<SegQualityScore>& scores);

struct HumanLabel {
  std::string ref;
  bool usable = false;
};

/// Line-delimited {subtask_ref, usable}. `subtask_ref` may be "task#i" or {task_id, subtask_index}.
std::vector<HumanLabel> load_human_labels(const std::filesystem::path& path);

struct AgreementResult {
  KappaResult kappa;
  std::size_t matched = 0;
  std::vector<std::string> unmatched_scores;
  std::vector<std::string> unmatched_labels;
};

/// Binarizes scores at >= 4 and computes Cohen's kappa over refs present in both inputs.
/// Throws std::invalid_argument when no ref matches.
AgreementResult agreement_vs_human(const std::vector<SegQualityScore>& scores, const std::vector<HumanLabel>& labels);

nlohmann::ordered_json to_json(const SegQualityScore& s);
nlohmann::ordered_json to_json(const ScoreDistribution& d);
/// Score table: label, share (1 d.p.) per score from 5 down to 1, then the usable share.
std::string render_distribution(const ScoreDistribution& d);

}  // namespace trajeval
