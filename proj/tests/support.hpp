#pragma once
// Shared fixtures: synthetic tasks, scripted backends, scratch directories.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "trajeval/mock_backend.hpp"
#include "trajeval/trajectory.hpp"

namespace trajeval::testing {

inline TaskInstance make_task(const std::string& id, std::size_t n, std::optional<bool> gold = true) {
  TaskInstance t;
  t.task_id = id;
  t.instruction = "Buy a blue mug for task " + id;
  t.gold_label = gold;
  for (std::size_t i = 0; i < n; ++i) t.trajectory.steps.push_back({i, "action " + std::to_string(i + 1), std::nullopt});
  return t;
}

/// Segmentation response splitting steps 1..n into the given inclusive end steps.
inline std::string segment_reply(const std::vector<std::size_t>& ends) {
  nlohmann::ordered_json subtasks = nlohmann::ordered_json::array();
  std::size_t start = 1;
  for (std::size_t i = 0; i < ends.size(); ++i) {
    subtasks.push_back({{"description", "goal " + std::to_string(i + 1)}, {"start_step", start}, {"end_step", ends[i]}});
    start = ends[i] + 1;
  }
  return nlohmann::ordered_json{{"subtasks", subtasks}}.dump();
}

inline std::string diagnosis_reply(const std::string& verdict) {
  nlohmann::ordered_json j;
  j["reasoning"] = "looked at the screens";
  j["verdict"] = verdict;
  j["error_analysis"] = verdict == "success" ? "" : "the cart stayed empty";
  j["issues"] = nlohmann::json::array();
  return j.dump();
}

inline std::string summary_reply(bool success) {
  nlohmann::ordered_json j;
  j["reasoning"] = "weighed the subtasks";
  j["success"] = success;
  j["justification"] = success ? "all goals met" : "checkout never happened";
  return j.dump();
}

/// Answers every stage with well-formed records; segmentation uses fixed end steps.
inline std::unique_ptr<MockBackend> scripted_backend(const std::vector<std::size_t>& ends, bool success = true) {
  auto m = std::make_unique<MockBackend>();
  m->add_response(Stage::segment, {}, segment_reply(ends));
  m->add_response(Stage::diagnose, {}, diagnosis_reply(success ? "success" : "fail"));
  m->add_response(Stage::summarize, {}, summary_reply(success));
  m->add_response(Stage::baseline, {}, summary_reply(success));
  m->add_response(Stage::seg_quality, {}, R"({"coherence_notes":"ok","alignment_notes":"ok","score":5})");
  return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("trajeval_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

}  // namespace trajeval::testing
