#include "trajeval/seg_quality.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "trajeval/diagnosis.hpp"
#include "trajeval/errors.hpp"

namespace trajeval {
using nlohmann::ordered_json;

std::string subtask_ref(const std::string& task_id, std::size_t subtask_index) {
  return task_id + "#" + std::to_string(subtask_index);
}

namespace {

std::string text_field(const Record& rec, const char* key) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return {};
  return it->is_string() ? it->get<std::string>() : it->dump();
}

}  // namespace

SegQualityScore seg_quality_from_record(const Record& rec, const std::string& task_id, std::size_t subtask_index) {
  SegQualityScore s;
  s.task_id = task_id;
  s.subtask_index = subtask_index;
  s.coherence_notes = text_field(rec, "coherence_notes");
  s.alignment_notes = text_field(rec, "alignment_notes");
  auto it = rec.find("score");
  if (it == rec.end()) throw SchemaViolation("quality record lacks a score");
  double raw = 0;
  if (it->is_number()) {
    raw = it->get<double>();
  } else if (it->is_string()) {
    try {
      raw = std::stod(it->get<std::string>());
    } catch (const std::exception&) {
      throw SchemaViolation("score '" + it->get<std::string>() + "' is not numeric");
    }
  } else {
    throw SchemaViolation("score is not numeric");
  }
  if (!std::isfinite(raw)) throw SchemaViolation("score is not finite");
  const long long rounded = std::llround(raw);
  const long long clamped = std::clamp<long long>(rounded, 1, 5);
  s.repaired = clamped != rounded || static_cast<double>(rounded) != raw || !it->is_number_integer();
  s.score = static_cast<int>(clamped);
  s.usable = s.score >= kUsableThreshold;
  return s;
}

ChatRequest build_seg_quality_request(const TaskInstance& task, const Segmentation& seg, std::size_t i,
                                      const PromptSet& prompts, const ImageLoader& images) {
  if (i < 1 || i > seg.k()) throw std::out_of_range("subtask index out of range");
  const auto& tr = task.trajectory;
  const auto& span = seg.subtasks[i - 1];
  std::string neighbors;
  auto describe = [&](const char* label, const SubtaskSpec& s, std::size_t edge_step) {
    if (!neighbors.empty()) neighbors += '\n';
    neighbors += std::string(label) + ": " + s.description + " (steps " + std::to_string(s.start_step) + "–" +
                 std::to_string(s.end_step) + "); adjacent action: Step " + std::to_string(edge_step) + ": " +
                 tr.steps[edge_step - 1].action_text;
  };
  if (i > 1) describe("Previous subtask", seg.subtasks[i - 2], seg.subtasks[i - 2].end_step);
  if (i < seg.k()) describe("Next subtask", seg.subtasks[i], seg.subtasks[i].start_step);
  if (neighbors.empty()) neighbors = "(none: this is the only subtask)";

  const auto& tpl = prompts.get(prompt_names::kSegQuality);
  ChatRequest req;
  req.stage = Stage::seg_quality;
  req.system_text = tpl.system;
  req.user_parts.push_back(TextPart{render_template(
      tpl.user, {{"task_instruction", task.instruction},
                 {"subtask_description", span.description},
                 {"step_range", std::to_string(span.start_step) + "–" + std::to_string(span.end_step)},
                 {"segment_actions", render_segment_actions(tr, span)},
                 {"neighbor_context", neighbors}})});
  for (std::size_t step = span.start_step; step <= span.end_step; ++step) {
    const auto& ref = tr.steps[step - 1].screenshot_ref;
    if (!ref) continue;
    if (auto img = images.load(*ref)) {
      req.user_parts.push_back(TextPart{"Screen after step " + std::to_string(step) + ":"});
      req.user_parts.emplace_back(std::move(*img));
    }
  }
  return req;
}

SegQualityScore score_subtask(const TaskInstance& task, const Segmentation& seg, std::size_t i, Backend& backend,
                              const CallOptions& call, const PromptSet& prompts, const ImageLoader& images,
                              AttemptStats* stats) {
  ChatRequest req = build_seg_quality_request(task, seg, i, prompts, images);
  call.apply(req);
  try {
    return complete_with_retry(
        backend, req, call.policy,
        [&](const ChatResponse& resp) { return seg_quality_from_record(extract_structured(resp.text), task.task_id, i); },
        call.env, stats);
  } catch (const RetriesExhausted& e) {
    SegQualityScore s;
    s.task_id = task.task_id;
    s.subtask_index = i;
    s.evaluator_error = true;
    s.coherence_notes = std::string("evaluator error: ") + e.what();
    return s;
  }
}

ScoreDistribution score_distribution(const std::vector<SegQualityScore>& scores) {
  ScoreDistribution d;
  for (const auto& s : scores) {
    if (s.evaluator_error) {
      ++d.excluded_errors;
      continue;
    }
    if (s.score < 1 || s.score > 5) throw std::invalid_argument("score outside 1..5");
    ++d.counts[static_cast<std::size_t>(s.score - 1)];
    ++d.total;
  }
  if (d.total == 0) throw std::invalid_argument("score_distribution: no valid scores");
  const double n = static_cast<double>(d.total);
  for (std::size_t i = 0; i < 5; ++i) d.percent[i] = 100.0 * static_cast<double>(d.counts[i]) / n;
  d.usable_pct = 100.0 * static_cast<double>(d.counts[3] + d.counts[4]) / n;
  return d;
}

std::vector<HumanLabel> load_human_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open human label file " + path.string());
  std::vector<HumanLabel> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto rec = nlohmann::json::parse(line);
      HumanLabel l;
      const auto& ref = rec.at("subtask_ref");
      l.ref = ref.is_string() ? ref.get<std::string>()
                              : subtask_ref(ref.at("task_id").get<std::string>(), ref.at("subtask_index").get<std::size_t>());
      l.usable = rec.at("usable").get<bool>();
      out.push_back(std::move(l));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(n) + ": bad label record: " + e.what());
    }
  }
  return out;
}

AgreementResult agreement_vs_human(const std::vector<SegQualityScore>& scores, const std::vector<HumanLabel>& labels) {
  std::map<std::string, bool> human;
  for (const auto& l : labels) human[l.ref] = l.usable;
  AgreementResult r;
  std::vector<bool> model_side, human_side;
  std::set<std::string> seen;
  for (const auto& s : scores) {
    if (s.evaluator_error) continue;
    const auto ref = s.ref();
    auto it = human.find(ref);
    if (it == human.end()) {
      r.unmatched_scores.push_back(ref);
      continue;
    }
    seen.insert(ref);
    model_side.push_back(s.score >= kUsableThreshold);
    human_side.push_back(it->second);
  }
  for (const auto& [ref, usable] : human) {
    if (!seen.count(ref)) r.unmatched_labels.push_back(ref);
  }
  if (model_side.empty()) throw std::invalid_argument("no subtask refs shared between scores and human labels");
  r.matched = model_side.size();
  r.kappa = cohen_kappa(model_side, human_side);
  return r;
}

ordered_json to_json(const SegQualityScore& s) {
  return {{"subtask_ref", s.ref()},
          {"task_id", s.task_id},
          {"subtask_index", s.subtask_index},
          {"score", s.score},
          {"usable", s.usable},
          {"coherence_notes", s.coherence_notes},
          {"alignment_notes", s.alignment_notes},
          {"repaired", s.repaired},
          {"evaluator_error", s.evaluator_error}};
}

ordered_json to_json(const ScoreDistribution& d) {
  ordered_json per_score = ordered_json::object();
  for (int s = 5; s >= 1; --s) {
    per_score[std::to_string(s)] = {{"count", d.counts[static_cast<std::size_t>(s - 1)]},
                                    {"percent", d.percent[static_cast<std::size_t>(s - 1)]}};
  }
  return {{"total", d.total},
          {"excluded_errors", d.excluded_errors},
          {"scores", std::move(per_score)},
          {"usable_percent", d.usable_pct}};
}

std::string render_distribution(const ScoreDistribution& d) {
  static constexpr const char* kLabels[] = {"Unusable", "Risky", "Minor Issues", "Usable", "Highly Usable"};
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-6s %-14s %8s\n", "Score", "Label", "%");
  out << buf;
  for (int s = 5; s >= 1; --s) {
    const auto i = static_cast<std::size_t>(s - 1);
    std::snprintf(buf, sizeof buf, "%-6d %-14s %8s\n", s, kLabels[i], format_pct(d.percent[i], 1).c_str());
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-21s %8s\n", "Usable (>=4)", format_pct(d.usable_pct, 1).c_str());
  out << buf;
  out << "n = " << d.total;
  if (d.excluded_errors) out << " (" << d.excluded_errors << " evaluator errors excluded)";
  out << '\n';
  return out.str();
}

}  // namespace trajeval
