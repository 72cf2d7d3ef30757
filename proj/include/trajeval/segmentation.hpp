#pragma once

// Stage 1: partition a trajectory into described subtask segments from its action text alone.

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajeval/chat.hpp"
#include "trajeval/extract.hpp"
#include "trajeval/prompts.hpp"
#include "trajeval/retry.hpp"
#include "trajeval/trajectory.hpp"

namespace trajeval {

struct SubtaskSpec {
  std::size_t index = 1;  // 1-based
  std::string description;
  std::size_t start_step = 1;  // inclusive, 1-based
  std::size_t end_step = 1;    // inclusive, 1-based
  bool repaired = false;

  std::size_t length() const { return end_step - start_step + 1; }
  friend bool operator==(const SubtaskSpec&, const SubtaskSpec&) = default;
};

/// boundaries b_0..b_k with 0 = b_0 < ... < b_k = n; subtask i spans steps (b_{i-1}, b_i].
struct Segmentation {
  std::vector<std::size_t> boundaries;
  std::vector<SubtaskSpec> subtasks;
  std::vector<std::string> repair_notes;

  std::size_t k() const { return subtasks.size(); }
  std::size_t steps() const { return boundaries.empty() ? 0 : boundaries.back(); }
  std::size_t max_segment_length() const;
  bool repaired() const;
  /// Throws std::invalid_argument when the partition law or subtask invariants fail for length n.
  void validate(std::size_t n) const;

  friend bool operator==(const Segmentation& a, const Segmentation& b) {
    return a.boundaries == b.boundaries && a.subtasks == b.subtasks;
  }
};

/// Builds a segmentation from boundaries and matching descriptions; no repair is applied.
Segmentation make_segmentation(const std::vector<std::size_t>& boundaries,
                               const std::vector<std::string>& descriptions);

/// Total repair of a raw boundary proposal: sort, drop duplicates and out-of-range values, force 0
/// and n, pad or truncate descriptions. An empty proposal, or one that reduces to [0, n] without a
/// description, becomes the single segment described by `fallback_description`.
Segmentation normalize_boundaries(const std::vector<long long>& raw, std::size_t n,
                                  const std::vector<std::string>& raw_descriptions,
                                  const std::string& fallback_description);

/// Splits every segment longer than `max_len` into near-equal pieces (sizes differ by at most 1).
Segmentation enforce_max_segment(const Segmentation& seg, std::size_t max_len = 30);

/// Parses the model's segmentation record ({"subtasks": [{description, start_step, end_step}]})
/// and normalizes it for a trajectory of length n. Throws SchemaViolation.
Segmentation segmentation_from_record(const Record& rec, std::size_t n, const std::string& fallback_description);

/// The text-only request for a task.
ChatRequest build_segmentation_request(const TaskInstance& task, const PromptSet& prompts);

struct SegmentationOutcome {
  Segmentation segmentation;
  AttemptStats stats;
};

/// Never returns an invalid partition. Propagates RetriesExhausted.
SegmentationOutcome segment_trajectory(const TaskInstance& task, Backend& backend, const CallOptions& call,
                                       const PromptSet& prompts, std::size_t max_segment_len = 30);

nlohmann::ordered_json to_json(const Segmentation& seg);
Segmentation segmentation_from_json(const nlohmann::ordered_json& j);

}  // namespace trajeval
