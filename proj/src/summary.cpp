#include "trajeval/summary.hpp"

#include "trajeval/errors.hpp"

namespace trajeval {
using nlohmann::ordered_json;

std::string_view to_string(DerivedFrom d) {
  switch (d) {
    case DerivedFrom::model_summary: return "model_summary";
    case DerivedFrom::hard_rule: return "hard_rule";
    case DerivedFrom::naive_call: return "naive_call";
    case DerivedFrom::baseline: return "baseline";
  }
  return "model_summary";
}

std::optional<DerivedFrom> derived_from_string(std::string_view s) {
  for (auto d : {DerivedFrom::model_summary, DerivedFrom::hard_rule, DerivedFrom::naive_call, DerivedFrom::baseline}) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

FinalVerdict aggregate_hard_rule(const std::vector<Verdict>& verdicts) {
  if (verdicts.empty()) throw std::invalid_argument("hard rule needs at least one verdict");
  FinalVerdict f;
  f.derived_from = DerivedFrom::hard_rule;
  std::string offending;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (verdicts[i] == Verdict::success) continue;
    if (!offending.empty()) offending += ", ";
    offending += std::to_string(i + 1) + " (" + std::string(to_string(verdicts[i])) + ")";
  }
  f.success = offending.empty();
  f.justification = f.success ? "all " + std::to_string(verdicts.size()) + " subtasks succeeded"
                              : "non-success subtasks: " + offending;
  return f;
}

FinalVerdict aggregate_hard_rule(const std::vector<SubtaskDiagnosis>& diagnoses) {
  std::vector<Verdict> v;
  v.reserve(diagnoses.size());
  for (const auto& d : diagnoses) v.push_back(d.verdict);
  return aggregate_hard_rule(v);
}

FinalVerdict aggregate_hard_rule(const std::vector<SubtaskVerdict>& verdicts) {
  std::vector<Verdict> v;
  v.reserve(verdicts.size());
  for (const auto& s : verdicts) v.push_back(s.success ? Verdict::success : Verdict::fail);
  return aggregate_hard_rule(v);
}

FinalVerdict final_verdict_from_record(const Record& rec, DerivedFrom derived_from) {
  FinalVerdict f;
  f.derived_from = derived_from;
  auto success = rec.find("success");
  if (success == rec.end() || !success->is_boolean()) throw SchemaViolation("'success' must be a boolean");
  f.success = success->get<bool>();
  if (auto r = rec.find("reasoning"); r != rec.end() && r->is_string()) f.reasoning = r->get<std::string>();
  auto j = rec.find("justification");
  if (j != rec.end() && j->is_string()) f.justification = j->get<std::string>();
  if (f.justification.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw SchemaViolation("verdict lacks a justification");
  }
  return f;
}

std::string render_diagnostic_evidence(const std::vector<SubtaskDiagnosis>& diagnoses) {
  std::string out;
  for (const auto& d : diagnoses) {
    if (!out.empty()) out += "\n\n";
    out += "Subtask " + std::to_string(d.subtask_index) + " - verdict: " + std::string(to_string(d.verdict));
    if (d.evaluator_error) out += " (evaluator error; treat as missing evidence)";
    out += "\nReasoning: " + d.reasoning;
    if (!d.error_analysis.empty()) out += "\nError analysis: " + d.error_analysis;
    if (d.issues.empty()) {
      out += "\nIssues: none";
    } else {
      out += "\nIssues:";
      for (const auto& i : d.issues) {
        out += "\n- step " + std::to_string(i.step_index) + ": " + i.problem;
        if (!i.root_cause.empty()) out += " | root cause: " + i.root_cause;
        if (!i.suggested_fix.empty()) out += " | fix: " + i.suggested_fix;
      }
    }
  }
  return out;
}

std::string render_verdict_evidence(const std::vector<SubtaskVerdict>& verdicts) {
  std::string out;
  for (const auto& v : verdicts) {
    if (!out.empty()) out += "\n\n";
    out += "Subtask " + std::to_string(v.subtask_index) + " - verdict: " + (v.success ? "success" : "fail");
    if (v.evaluator_error) out += " (evaluator error; treat as missing evidence)";
    out += "\nReasoning: " + v.reasoning;
  }
  return out;
}

std::string render_subtask_summaries(const Segmentation& seg, const std::vector<std::string>& verdict_labels) {
  std::string out;
  for (std::size_t i = 0; i < seg.subtasks.size(); ++i) {
    const auto& s = seg.subtasks[i];
    if (!out.empty()) out += '\n';
    out += std::to_string(s.index) + ". " + s.description + " (steps " + std::to_string(s.start_step) + "–" +
           std::to_string(s.end_step) + ")";
    if (i < verdict_labels.size()) out += ": " + verdict_labels[i];
  }
  return out;
}

namespace {

ChatRequest summary_request(const TaskInstance& task, const std::string& evidence, const std::string& secondary,
                            const PromptSet& prompts) {
  const auto& tpl = prompts.get(prompt_names::kSummarize);
  ChatRequest req;
  req.stage = Stage::summarize;
  req.system_text = tpl.system;
  req.user_parts.push_back(TextPart{render_template(tpl.user, {{"task_instruction", task.instruction},
                                                               {"diagnostic_evidence", evidence},
                                                               {"subtask_summaries_secondary", secondary}})});
  return req;
}

template <typename Evidence>
SummaryOutcome run_summary(ChatRequest req, const Evidence& evidence, Backend& backend, const CallOptions& call) {
  call.apply(req);
  SummaryOutcome out;
  try {
    out.verdict = complete_with_retry(
        backend, req, call.policy,
        [](const ChatResponse& resp) {
          return final_verdict_from_record(extract_structured(resp.text), DerivedFrom::model_summary);
        },
        call.env, &out.stats);
  } catch (const RetriesExhausted& e) {
    out.verdict = aggregate_hard_rule(evidence);
    out.verdict.fallback = true;
    out.verdict.justification =
        "summary unavailable (" + std::string(e.what()) + "); hard-rule fallback: " + out.verdict.justification;
  }
  return out;
}

}  // namespace

ChatRequest build_summary_request(const TaskInstance& task, const Segmentation& seg,
                                  const std::vector<SubtaskDiagnosis>& diagnoses, const PromptSet& prompts) {
  std::vector<std::string> labels;
  for (const auto& d : diagnoses) labels.emplace_back(to_string(d.verdict));
  return summary_request(task, render_diagnostic_evidence(diagnoses), render_subtask_summaries(seg, labels), prompts);
}

ChatRequest build_summary_request(const TaskInstance& task, const Segmentation& seg,
                                  const std::vector<SubtaskVerdict>& verdicts, const PromptSet& prompts) {
  std::vector<std::string> labels;
  for (const auto& v : verdicts) labels.emplace_back(v.success ? "success" : "fail");
  return summary_request(task, render_verdict_evidence(verdicts), render_subtask_summaries(seg, labels), prompts);
}

SummaryOutcome summarize(const TaskInstance& task, const Segmentation& seg,
                         const std::vector<SubtaskDiagnosis>& diagnoses, Backend& backend, const CallOptions& call,
                         const PromptSet& prompts) {
  if (diagnoses.size() != seg.k()) throw std::invalid_argument("summarize needs one diagnosis per subtask");
  return run_summary(build_summary_request(task, seg, diagnoses, prompts), diagnoses, backend, call);
}

SummaryOutcome summarize(const TaskInstance& task, const Segmentation& seg, const std::vector<SubtaskVerdict>& verdicts,
                         Backend& backend, const CallOptions& call, const PromptSet& prompts) {
  if (verdicts.size() != seg.k()) throw std::invalid_argument("summarize needs one verdict per subtask");
  return run_summary(build_summary_request(task, seg, verdicts, prompts), verdicts, backend, call);
}

ordered_json to_json(const FinalVerdict& v) {
  return {{"success", v.success},
          {"justification", v.justification},
          {"reasoning", v.reasoning},
          {"derived_from", to_string(v.derived_from)},
          {"fallback", v.fallback}};
}

FinalVerdict final_verdict_from_json(const ordered_json& j) {
  FinalVerdict v;
  v.success = j.at("success").get<bool>();
  v.justification = j.value("justification", "");
  v.reasoning = j.value("reasoning", "");
  auto d = derived_from_string(j.at("derived_from").get<std::string>());
  if (!d) throw std::invalid_argument("bad derived_from in report");
  v.derived_from = *d;
  v.fallback = j.value("fallback", false);
  return v;
}

}  // namespace trajeval
