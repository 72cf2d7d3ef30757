#include "trajeval/diagnosis.hpp"

#include <algorithm>
#include <cctype>

#include "trajeval/errors.hpp"
#include "trajeval/parallel.hpp"

namespace trajeval {
using nlohmann::ordered_json;

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::success: return "success";
    case Verdict::partial: return "partial";
    case Verdict::fail: return "fail";
  }
  return "fail";
}

std::optional<Verdict> parse_verdict(std::string_view text) {
  std::string s;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalpha(u)) {
      s.push_back(static_cast<char>(std::tolower(u)));
    } else if (!s.empty() && s.back() != ' ') {
      s.push_back(' ');
    }
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();

  static const std::pair<std::string_view, Verdict> kSynonyms[] = {
      {"success", Verdict::success},
      {"succeeded", Verdict::success},
      {"successful", Verdict::success},
      {"succeed", Verdict::success},
      {"partial", Verdict::partial},
      {"partially", Verdict::partial},
      {"partial success", Verdict::partial},
      {"partially successful", Verdict::partial},
      {"partially succeeded", Verdict::partial},
      {"partially completed", Verdict::partial},
      {"fail", Verdict::fail},
      {"failure", Verdict::fail},
      {"failed", Verdict::fail},
      {"unsuccessful", Verdict::fail},
  };
  for (const auto& [word, v] : kSynonyms) {
    if (s == word) return v;
  }
  return std::nullopt;
}

std::string render_subtask_list(const Segmentation& seg, std::size_t current) {
  std::string out;
  for (const auto& s : seg.subtasks) {
    if (!out.empty()) out += '\n';
    out += std::to_string(s.index) + ". " + s.description + " (steps " + std::to_string(s.start_step) + "–" +
           std::to_string(s.end_step) + ")";
    if (s.index == current) out += "  <- CURRENT";
  }
  return out;
}

std::string render_segment_actions(const Trajectory& tr, const SubtaskSpec& span) {
  std::string out;
  for (std::size_t step = span.start_step; step <= span.end_step; ++step) {
    if (!out.empty()) out += '\n';
    std::string action = tr.steps.at(step - 1).action_text;
    std::replace(action.begin(), action.end(), '\n', ' ');
    out += "Step " + std::to_string(step) + ": " + action;
  }
  return out;
}

BuiltRequest build_diagnosis_request(const TaskInstance& task, const Segmentation& seg, std::size_t i,
                                     const PromptSet& prompts, const ImageLoader& images,
                                     std::string_view template_name) {
  if (i < 1 || i > seg.k()) throw std::out_of_range("subtask index out of range");
  const auto& tr = task.trajectory;
  const auto& span = seg.subtasks[i - 1];
  const auto& tpl = prompts.get(template_name);
  const std::string current = std::to_string(span.index) + ". " + span.description + " (steps " +
                              std::to_string(span.start_step) + "–" + std::to_string(span.end_step) + ")";

  BuiltRequest built;
  auto& req = built.request;
  req.stage = Stage::diagnose;
  req.system_text = tpl.system;
  req.user_parts.push_back(TextPart{render_template(tpl.user, {{"task_instruction", task.instruction},
                                                               {"subtask_list", render_subtask_list(seg, i)},
                                                               {"current_subtask", current},
                                                               {"segment_actions", render_segment_actions(tr, span)}})});

  auto attach = [&](const std::optional<std::string>& ref) {
    if (!ref) return false;
    auto img = images.load(*ref);
    if (!img) return false;
    req.user_parts.emplace_back(std::move(*img));
    ++built.images_sent;
    return true;
  };

  // Screen before the first action of the subtask.
  const auto& before = span.start_step == 1 ? tr.initial_screenshot_ref : tr.steps[span.start_step - 2].screenshot_ref;
  if (before) {
    req.user_parts.push_back(TextPart{"Screen before step " + std::to_string(span.start_step) + ":"});
    if (!attach(before)) {
      req.user_parts.back() = TextPart{"[no screenshot before step " + std::to_string(span.start_step) + "]"};
      ++built.missing_screenshots;
    }
  }
  for (std::size_t step = span.start_step; step <= span.end_step; ++step) {
    req.user_parts.push_back(TextPart{"Screen after step " + std::to_string(step) + ":"});
    if (!attach(tr.steps[step - 1].screenshot_ref)) {
      req.user_parts.back() = TextPart{"[no screenshot for step " + std::to_string(step) + "]"};
      ++built.missing_screenshots;
    }
  }
  if (span.end_step != tr.length()) {
    req.user_parts.push_back(TextPart{"Final screen of the trajectory (after step " + std::to_string(tr.length()) + "):"});
    if (!attach(tr.final_screenshot())) {
      req.user_parts.back() = TextPart{"[no final screenshot]"};
      ++built.missing_screenshots;
    }
  }
  return built;
}

namespace {

std::string string_field(const Record& rec, const char* key) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

std::optional<long long> integer_field(const Record& rec, const char* key) {
  auto it = rec.find(key);
  if (it == rec.end()) return std::nullopt;
  if (it->is_number_integer()) return it->get<long long>();
  if (it->is_number_float()) return static_cast<long long>(it->get<double>());
  if (it->is_string()) {
    try {
      return std::stoll(it->get<std::string>());
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

/// Position of `key` in the record's insertion order, or npos.
std::size_t key_position(const Record& rec, std::string_view key) {
  std::size_t pos = 0;
  for (auto it = rec.begin(); it != rec.end(); ++it, ++pos) {
    if (it.key() == key) return pos;
  }
  return std::string::npos;
}

std::string required_reasoning(const Record& rec) {
  const std::string reasoning = string_field(rec, "reasoning");
  if (reasoning.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw SchemaViolation("diagnosis lacks a reasoning trace");
  }
  if (key_position(rec, "reasoning") > key_position(rec, "verdict")) {
    throw SchemaViolation("reasoning must precede the verdict");
  }
  return reasoning;
}

Verdict required_verdict(const Record& rec) {
  auto it = rec.find("verdict");
  if (it == rec.end() || !it->is_string()) throw SchemaViolation("diagnosis lacks a verdict");
  auto v = parse_verdict(it->get<std::string>());
  if (!v) throw SchemaViolation("unrecognized verdict '" + it->get<std::string>() + "'");
  return *v;
}

}  // namespace

SubtaskDiagnosis diagnosis_from_record(const Record& rec, const SubtaskSpec& span) {
  SubtaskDiagnosis d;
  d.subtask_index = span.index;
  d.reasoning = required_reasoning(rec);
  d.verdict = required_verdict(rec);
  d.error_analysis = string_field(rec, "error_analysis");

  if (auto it = rec.find("issues"); it != rec.end() && !it->is_null()) {
    if (!it->is_array()) throw SchemaViolation("issues must be a list");
    for (const auto& item : *it) {
      if (!item.is_object()) throw SchemaViolation("issue entry is not an object");
      StepIssue issue;
      issue.problem = string_field(item, "problem");
      issue.root_cause = string_field(item, "root_cause");
      issue.suggested_fix = string_field(item, "suggested_fix");
      const auto step = integer_field(item, "step");
      const long long lo = static_cast<long long>(span.start_step);
      const long long hi = static_cast<long long>(span.end_step);
      const long long clamped = std::clamp(step.value_or(lo), lo, hi);
      issue.clamped = !step || clamped != *step;
      issue.step_index = static_cast<std::size_t>(clamped);
      d.repaired = d.repaired || issue.clamped;
      d.issues.push_back(std::move(issue));
    }
  }

  if (d.verdict != Verdict::success && d.error_analysis.find_first_not_of(" \t\r\n") == std::string::npos) {
    // Salvage an analysis from the issue list before rejecting the response.
    std::string salvaged;
    for (const auto& issue : d.issues) {
      const std::string& part = issue.root_cause.empty() ? issue.problem : issue.root_cause;
      if (part.empty()) continue;
      if (!salvaged.empty()) salvaged += "; ";
      salvaged += "step " + std::to_string(issue.step_index) + ": " + part;
    }
    if (salvaged.empty()) throw SchemaViolation("non-success verdict without an error analysis");
    d.error_analysis = std::move(salvaged);
    d.repaired = true;
  }
  return d;
}

SubtaskVerdict verdict_from_record(const Record& rec, std::size_t subtask_index) {
  SubtaskVerdict v;
  v.subtask_index = subtask_index;
  v.reasoning = required_reasoning(rec);
  const Verdict parsed = required_verdict(rec);
  v.success = parsed == Verdict::success;
  // The binary schema has no partial class; partial counts as not completed.
  v.repaired = parsed == Verdict::partial;
  return v;
}

DiagnosisOutcome diagnose_subtask(const TaskInstance& task, const Segmentation& seg, std::size_t i,
                                  Backend& backend, const CallOptions& call, const PromptSet& prompts,
                                  const ImageLoader& images) {
  BuiltRequest built = build_diagnosis_request(task, seg, i, prompts, images);
  call.apply(built.request);
  const auto& span = seg.subtasks[i - 1];
  DiagnosisOutcome out;
  out.diagnosis = complete_with_retry(
      backend, built.request, call.policy,
      [&](const ChatResponse& resp) { return diagnosis_from_record(extract_structured(resp.text), span); },
      call.env, &out.stats);
  out.diagnosis.images_sent = built.images_sent;
  out.diagnosis.missing_screenshots = built.missing_screenshots;
  return out;
}

SubtaskDiagnosis evaluator_error_diagnosis(std::size_t subtask_index, const std::string& what) {
  SubtaskDiagnosis d;
  d.subtask_index = subtask_index;
  d.verdict = Verdict::fail;
  d.reasoning = "evaluator error: no valid diagnosis could be obtained";
  d.error_analysis = "evaluator error: " + what;
  d.evaluator_error = true;
  return d;
}

DiagnosesOutcome diagnose_all(const TaskInstance& task, const Segmentation& seg, Backend& backend,
                              const CallOptions& call, const PromptSet& prompts, const ImageLoader& images,
                              std::size_t parallelism) {
  const std::size_t k = seg.k();
  std::vector<SubtaskDiagnosis> results(k);
  std::vector<AttemptStats> stats(k);
  parallel_for(k, parallelism, [&](std::size_t idx) {
    try {
      auto out = diagnose_subtask(task, seg, idx + 1, backend, call, prompts, images);
      results[idx] = std::move(out.diagnosis);
      stats[idx] = std::move(out.stats);
    } catch (const RetriesExhausted& e) {
      results[idx] = evaluator_error_diagnosis(idx + 1, e.what());
      stats[idx].attempts = e.attempts();
      stats[idx].failures = e.reasons();
    }
  });
  DiagnosesOutcome out;
  out.diagnoses = std::move(results);
  for (const auto& s : stats) out.stats.merge(s);
  return out;
}

VerdictsOutcome verdict_all(const TaskInstance& task, const Segmentation& seg, Backend& backend,
                            const CallOptions& call, const PromptSet& prompts, const ImageLoader& images,
                            std::size_t parallelism) {
  const std::size_t k = seg.k();
  std::vector<SubtaskVerdict> results(k);
  std::vector<AttemptStats> stats(k);
  std::vector<std::pair<std::size_t, std::size_t>> image_counts(k);
  parallel_for(k, parallelism, [&](std::size_t idx) {
    BuiltRequest built = build_diagnosis_request(task, seg, idx + 1, prompts, images, prompt_names::kDiagnoseBare);
    image_counts[idx] = {built.images_sent, built.missing_screenshots};
    call.apply(built.request);
    try {
      results[idx] = complete_with_retry(
          backend, built.request, call.policy,
          [&](const ChatResponse& resp) { return verdict_from_record(extract_structured(resp.text), idx + 1); },
          call.env, &stats[idx]);
    } catch (const RetriesExhausted& e) {
      SubtaskVerdict v;
      v.subtask_index = idx + 1;
      v.success = false;
      v.reasoning = std::string("evaluator error: ") + e.what();
      v.evaluator_error = true;
      results[idx] = std::move(v);
    }
  });
  VerdictsOutcome out;
  out.verdicts = std::move(results);
  for (const auto& s : stats) out.stats.merge(s);
  for (const auto& [sent, missing] : image_counts) {
    out.images_sent += sent;
    out.missing_screenshots += missing;
  }
  return out;
}

ordered_json to_json(const SubtaskDiagnosis& d) {
  ordered_json issues = ordered_json::array();
  for (const auto& i : d.issues) {
    issues.push_back({{"step", i.step_index},
                      {"problem", i.problem},
                      {"root_cause", i.root_cause},
                      {"suggested_fix", i.suggested_fix},
                      {"clamped", i.clamped}});
  }
  return {{"subtask_index", d.subtask_index},
          {"reasoning", d.reasoning},
          {"verdict", to_string(d.verdict)},
          {"error_analysis", d.error_analysis},
          {"issues", std::move(issues)},
          {"repaired", d.repaired},
          {"evaluator_error", d.evaluator_error},
          {"images_sent", d.images_sent},
          {"missing_screenshots", d.missing_screenshots}};
}

SubtaskDiagnosis diagnosis_from_json(const ordered_json& j) {
  SubtaskDiagnosis d;
  d.subtask_index = j.at("subtask_index").get<std::size_t>();
  d.reasoning = j.at("reasoning").get<std::string>();
  auto v = parse_verdict(j.at("verdict").get<std::string>());
  if (!v) throw std::invalid_argument("bad verdict in report");
  d.verdict = *v;
  d.error_analysis = j.value("error_analysis", "");
  for (const auto& i : j.value("issues", ordered_json::array())) {
    d.issues.push_back({i.at("step").get<std::size_t>(), i.value("problem", ""), i.value("root_cause", ""),
                        i.value("suggested_fix", ""), i.value("clamped", false)});
  }
  d.repaired = j.value("repaired", false);
  d.evaluator_error = j.value("evaluator_error", false);
  d.images_sent = j.value("images_sent", std::size_t{0});
  d.missing_screenshots = j.value("missing_screenshots", std::size_t{0});
  return d;
}

ordered_json to_json(const SubtaskVerdict& v) {
  return {{"subtask_index", v.subtask_index},
          {"reasoning", v.reasoning},
          {"verdict", v.success ? "success" : "fail"},
          {"repaired", v.repaired},
          {"evaluator_error", v.evaluator_error}};
}

SubtaskVerdict subtask_verdict_from_json(const ordered_json& j) {
  SubtaskVerdict v;
  v.subtask_index = j.at("subtask_index").get<std::size_t>();
  v.reasoning = j.at("reasoning").get<std::string>();
  v.success = j.at("verdict").get<std::string>() == "success";
  v.repaired = j.value("repaired", false);
  v.evaluator_error = j.value("evaluator_error", false);
  return v;
}

}  // namespace trajeval
