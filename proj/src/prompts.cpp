#include "trajeval/prompts.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "trajeval/errors.hpp"
#include "trajeval/hashing.hpp"

namespace trajeval {
namespace fs = std::filesystem;

namespace {

constexpr const char* kJudgeSystem =
    "You are a meticulous evaluator of GUI agent trajectories. You judge only from the evidence "
    "provided, never assume unseen actions succeeded, and always answer with a single JSON object.";

constexpr const char* kSegmentUser = R"(Task instruction:
{task_instruction}

Below is the complete action sequence the agent executed, one numbered step per line:
{action_transcript}

Split the action sequence into consecutive subtasks. Each subtask is a contiguous run of steps that
pursues one coherent intermediate goal (for example: open the search page, enter the query, pick a
result, fill in the form). Every step belongs to exactly one subtask; subtasks do not overlap and
together cover step 1 through the last step. Choose as many subtasks as the behaviour naturally
contains. Describe each subtask by the goal the agent was pursuing, not by whether it succeeded.

Respond with JSON only, using 1-based inclusive step ranges:
{"subtasks": [{"description": "<goal of the subtask>", "start_step": <int>, "end_step": <int>}]})";

constexpr const char* kDiagnoseUser = R"(Task instruction:
{task_instruction}

The trajectory has been divided into these subtasks (the one marked CURRENT is under review; the
others are context only, so do not credit or blame the current subtask for their objectives):
{subtask_list}

Current subtask: {current_subtask}

Actions in this subtask (global step numbers):
{segment_actions}

Screenshots follow: the screen before the subtask (when available), the screen after each action in
the subtask, and the final screen of the whole trajectory.

Decide whether the current subtask was completed. Reason step by step first, then commit to a
verdict. Use "success" when the subtask goal is fully achieved, "partial" when it was partially
completed with residual errors, and "fail" otherwise. For every problematic step give the global
step number, what went wrong, the root cause and a concrete fix.

Respond with JSON only, with the fields in exactly this order:
{"reasoning": "<step-by-step analysis>", "verdict": "success|partial|fail", "error_analysis": "<root-cause summary, empty only for success>", "issues": [{"step": <int>, "problem": "<what went wrong>", "root_cause": "<why>", "suggested_fix": "<how to fix>"}]})";

constexpr const char* kDiagnoseBareUser = R"(Task instruction:
{task_instruction}

The trajectory has been divided into these subtasks (the one marked CURRENT is under review):
{subtask_list}

Current subtask: {current_subtask}

Actions in this subtask (global step numbers):
{segment_actions}

Screenshots of this subtask and the final screen follow.

Was the current subtask completed? Give a one-line reason and a binary verdict. Do not analyse
errors or propose fixes.

Respond with JSON only:
{"reasoning": "<one line>", "verdict": "success|fail"})";

constexpr const char* kSummarizeUser = R"(Task instruction:
{task_instruction}

Primary evidence: the per-subtask diagnoses, including reasoning traces and step-level issues:
{diagnostic_evidence}

Secondary reference: the subtask descriptions and their verdicts. When they disagree with the
diagnostic evidence above, trust the evidence:
{subtask_summaries_secondary}

Decide whether the whole task was accomplished. Reason holistically: an agent may fail an
intermediate subtask and later recover, and a run of successful subtasks can still miss the task's
actual requirement. Reason first, then decide.

Respond with JSON only, fields in this order:
{"reasoning": "<analysis>", "success": true|false, "justification": "<one or two sentences>"})";

constexpr const char* kNaiveUser = R"(Task instruction:
{task_instruction}

Complete action sequence:
{action_transcript}

Screenshots taken after the actions follow in order.

Did the agent accomplish the task? Respond with JSON only:
{"reasoning": "<analysis>", "success": true|false, "justification": "<one or two sentences>"})";

constexpr const char* kAgentTrekUser = R"(Task instruction:
{task_instruction}

Complete action sequence:
{action_transcript}

The screenshot of the final screen follows.

Did the agent accomplish the task? Respond with JSON only:
{"reasoning": "<analysis>", "success": true|false, "justification": "<one or two sentences>"})";

constexpr const char* kSegQualitySystem =
    "You audit how a GUI trajectory was divided into subtasks. You judge segment quality only, not "
    "whether the agent succeeded, and always answer with a single JSON object.";

constexpr const char* kSegQualityUser = R"(Task instruction:
{task_instruction}

Subtask under review: {subtask_description}
Step range: {step_range}

Actions in this subtask:
{segment_actions}

Neighbouring subtasks, for judging the boundaries:
{neighbor_context}

Screenshots of the subtask follow.

Rate the segment on two dimensions:
1. coherence and boundary quality: the steps form one coherent unit and the boundaries fall at
   sensible places;
2. description-behaviour alignment: the description matches what the agent actually did.

Give one integer score from 1 (unusable: a degenerate split that would mislead a downstream
diagnosis) to 5 (highly usable: a coherent segment with an accurate description).

Respond with JSON only:
{"coherence_notes": "<dimension 1>", "alignment_notes": "<dimension 2>", "score": <1-5>})";

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read prompt file " + p.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

std::string PromptTemplate::content_hash() const {
  return sha256_hex("system:" + std::to_string(system.size()) + ":" + system + "user:" + user);
}

const std::vector<std::string>& required_placeholders(std::string_view name) {
  static const std::map<std::string, std::vector<std::string>, std::less<>> kRequired = {
      {"segment", {"task_instruction", "action_transcript"}},
      {"diagnose", {"task_instruction", "subtask_list", "current_subtask", "segment_actions"}},
      {"diagnose_bare", {"task_instruction", "subtask_list", "current_subtask", "segment_actions"}},
      {"summarize", {"task_instruction", "diagnostic_evidence", "subtask_summaries_secondary"}},
      {"naive", {"task_instruction", "action_transcript"}},
      {"agenttrek", {"task_instruction", "action_transcript"}},
      {"seg_quality",
       {"task_instruction", "subtask_description", "step_range", "segment_actions", "neighbor_context"}},
  };
  static const std::vector<std::string> kNone;
  auto it = kRequired.find(name);
  return it == kRequired.end() ? kNone : it->second;
}

PromptSet PromptSet::defaults() {
  PromptSet set;
  set.set("segment", {kJudgeSystem, kSegmentUser});
  set.set("diagnose", {kJudgeSystem, kDiagnoseUser});
  set.set("diagnose_bare", {kJudgeSystem, kDiagnoseBareUser});
  set.set("summarize", {kJudgeSystem, kSummarizeUser});
  set.set("naive", {kJudgeSystem, kNaiveUser});
  set.set("agenttrek", {kJudgeSystem, kAgentTrekUser});
  set.set("seg_quality", {kSegQualitySystem, kSegQualityUser});
  return set;
}

PromptSet PromptSet::load_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("prompt directory " + dir.string() + " does not exist");
  PromptSet set = defaults();
  for (auto& [name, tpl] : set.templates_) {
    if (auto p = dir / (name + ".system.txt"); fs::exists(p)) tpl.system = read_file(p);
    if (auto p = dir / (name + ".user.txt"); fs::exists(p)) tpl.user = read_file(p);
  }
  for (const auto& [name, tpl] : set.templates_) set.check(name);
  return set;
}

bool PromptSet::has(std::string_view name) const { return templates_.find(name) != templates_.end(); }

const PromptTemplate& PromptSet::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ConfigError("no prompt template named '" + std::string(name) + "'");
  return it->second;
}

void PromptSet::set(std::string name, PromptTemplate t) { templates_[std::move(name)] = std::move(t); }

void PromptSet::check(std::string_view name) const {
  const auto& t = get(name);
  for (const auto& key : required_placeholders(name)) {
    if (t.user.find("{" + key + "}") == std::string::npos) {
      throw ConfigError("prompt template '" + std::string(name) + "' lacks placeholder {" + key + "}");
    }
  }
}

std::map<std::string, std::string> PromptSet::hashes() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, tpl] : templates_) out[name] = tpl.content_hash();
  return out;
}

void PromptSet::write_dir(const fs::path& dir) const {
  fs::create_directories(dir);
  for (const auto& [name, tpl] : templates_) {
    std::ofstream(dir / (name + ".system.txt"), std::ios::binary) << tpl.system;
    std::ofstream(dir / (name + ".user.txt"), std::ios::binary) << tpl.user;
  }
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(text.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

}  // namespace trajeval
