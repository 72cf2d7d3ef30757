#pragma once

// Variant dispatch over the three stages, baselines, and resumable dataset runs.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajeval/chat.hpp"
#include "trajeval/http_backend.hpp"
#include "trajeval/images.hpp"
#include "trajeval/prompts.hpp"
#include "trajeval/report.hpp"
#include "trajeval/retry.hpp"
#include "trajeval/trajectory.hpp"

namespace trajeval {

struct BackendSettings {
  std::string kind = "mock";  // "mock" or "http"
  HttpBackendConfig http;
};

struct PipelineConfig {
  Variant variant = Variant::full;
  BackendSettings backend;
  RetryPolicy retry;
  std::map<Stage, double> temperatures;
  std::optional<int> max_output;
  std::optional<std::string> prompts_dir;
  PromptSet prompts = PromptSet::defaults();
  std::size_t max_segment_len = 30;
  std::size_t task_parallelism = 1;
  std::size_t diagnosis_parallelism = 1;
  unsigned long long seed = 0;
  int image_max_dimension = 1280;
  bool naive_text_only = false;

  /// Throws ConfigError.
  void validate() const;
  /// Stable hash of the result-affecting settings, including prompt content hashes.
  /// Parallelism limits are excluded: they never change a report.
  std::string fingerprint() const;
  nlohmann::ordered_json to_json() const;
};

/// Unknown keys are rejected. Relative prompt directories resolve against `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Prompt templates each variant needs.
std::vector<std::string> templates_for(Variant v);

/// Backend named by the config (http) or a scripted mock from `mock_script`.
std::unique_ptr<Backend> make_backend(const BackendSettings& settings,
                                      const std::optional<std::filesystem::path>& mock_script);

struct SingleCallOutcome {
  FinalVerdict verdict;
  AttemptStats stats;
  std::size_t images_sent = 0;
  std::size_t missing_screenshots = 0;
};

/// Instruction + full transcript + final screenshot. Propagates RetriesExhausted.
ChatRequest build_agenttrek_request(const TaskInstance& task, const PromptSet& prompts, const ImageLoader& images,
                                    std::size_t* missing = nullptr);
SingleCallOutcome agenttrek_baseline(const TaskInstance& task, Backend& backend, const CallOptions& call,
                                     const PromptSet& prompts, const ImageLoader& images);

/// Instruction + full transcript + every screenshot (none when `text_only`).
ChatRequest build_naive_request(const TaskInstance& task, const PromptSet& prompts, const ImageLoader& images,
                                bool text_only, std::size_t* missing = nullptr);
SingleCallOutcome naive_evaluate(const TaskInstance& task, Backend& backend, const CallOptions& call,
                                 const PromptSet& prompts, const ImageLoader& images, bool text_only);

/// Evaluates one task with the configured variant. Always returns a schema-valid report; stage
/// failures degrade into flagged entries.
EvaluationReport evaluate(const TaskInstance& task, const PipelineConfig& config, Backend& backend,
                          const RetryEnv& env = {});

struct TaskFailure {
  std::string task_id;
  std::string error;
};

struct RunManifest {
  std::string dataset;
  std::string variant;
  std::string config_fingerprint;
  std::map<std::string, std::string> prompt_hashes;
  std::string backend;
  unsigned long long seed = 0;
  std::size_t total = 0;
  std::size_t completed = 0;          // reports present after this run
  std::size_t evaluated = 0;          // reports produced by this run
  std::size_t skipped_resumed = 0;    // already present before this run
  std::size_t evaluator_errors = 0;   // among reports produced by this run
  std::vector<TaskFailure> failures;  // tasks without a report

  nlohmann::ordered_json to_json() const;
};

struct RunOptions {
  /// Stop after this many new evaluations (simulates an interrupted run).
  std::optional<std::size_t> max_tasks;
  /// Called for each report in dataset order as it is written.
  std::function<void(const EvaluationReport&)> on_report;
};

inline constexpr const char* kReportsFile = "reports.jsonl";
inline constexpr const char* kManifestFile = "manifest.jsonl";

/// Writes `reports.jsonl` incrementally in dataset order and appends one manifest record to
/// `manifest.jsonl`. Tasks already present in `reports.jsonl` are skipped. Throws DatasetError
/// for an empty dataset and ConfigError when resuming under a different config fingerprint.
RunManifest evaluate_dataset(const Dataset& dataset, const PipelineConfig& config, Backend& backend,
                             const std::filesystem::path& out_dir, const RetryEnv& env = {},
                             const RunOptions& options = {});

}  // namespace trajeval
