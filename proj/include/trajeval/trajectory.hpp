#pragma once

// Task/trajectory data model and line-delimited dataset ingestion.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajeval/metrics.hpp"

namespace trajeval {

/// One agent action. `screenshot_ref` is the observation taken after the action executes.
struct Step {
  std::size_t index = 0;
  std::string action_text;
  std::optional<std::string> screenshot_ref;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
  std::optional<std::string> initial_screenshot_ref;
  std::vector<Step> steps;

  std::size_t length() const { return steps.size(); }
  /// True when every step carries a screenshot reference.
  bool images_complete() const;
  /// True when at least one observation (initial or per step) is referenced.
  bool any_images() const;
  /// Reference to the final observation s_n, if any.
  std::optional<std::string> final_screenshot() const;
  /// Throws std::invalid_argument when indices are not 0..n-1, n is 0 or an action is empty.
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct TaskInstance {
  std::string task_id;
  std::string instruction;
  std::optional<bool> gold_label;
  std::optional<std::string> source_tag;
  Trajectory trajectory;

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

enum class IndexConvention { zero_based, one_based };

struct Dataset {
  std::string name;
  std::vector<TaskInstance> items;
  /// Original step-index convention per task_id, as observed at ingestion.
  std::map<std::string, IndexConvention> index_conventions;
  std::vector<std::string> warnings;

  std::size_t success_count() const;
  std::size_t failure_count() const;
  std::size_t unlabeled_count() const;
  const TaskInstance* find(const std::string& task_id) const;
};

struct IngestOptions {
  bool verify_images = false;
};

/// Reads a dataset file. Relative screenshot paths resolve against the file's directory and are
/// stored as absolute paths. Throws DatasetError with the offending line number.
Dataset load_dataset(const std::filesystem::path& path, const IngestOptions& options = {});

/// Parses dataset text. `base_dir` resolves relative screenshot paths.
Dataset parse_dataset(const std::string& text, const std::filesystem::path& base_dir,
                      const std::string& name, const IngestOptions& options = {});

nlohmann::json task_to_json(const TaskInstance& task);
/// One record per line, 0-based step indices.
std::string serialize_dataset(const Dataset& d);

struct StatsSummary {
  std::size_t total = 0;
  std::size_t success = 0;
  std::size_t failure = 0;
  std::size_t unlabeled = 0;
  /// Percentages over labeled items; both 0 when nothing is labeled.
  double success_pct = 0;
  double failure_pct = 0;
  std::map<LengthGroup, std::size_t> length_histogram;
};

StatsSummary dataset_stats(const Dataset& d);

/// "Step i: <action>" per line, i = 1..n, no trailing newline.
std::string action_transcript(const Trajectory& tr);

}  // namespace trajeval
