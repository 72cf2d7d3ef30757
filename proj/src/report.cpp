#include "trajeval/report.hpp"

#include <fstream>

#include "trajeval/errors.hpp"

namespace trajeval {
using nlohmann::ordered_json;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::naive: return "naive";
    case Variant::no_seg: return "no_seg";
    case Variant::no_diag: return "no_diag";
    case Variant::no_sum: return "no_sum";
    case Variant::agenttrek_baseline: return "agenttrek_baseline";
  }
  return "full";
}

std::optional<Variant> variant_from_string(std::string_view s) {
  for (auto v : {Variant::full, Variant::naive, Variant::no_seg, Variant::no_diag, Variant::no_sum,
                 Variant::agenttrek_baseline}) {
    if (to_string(v) == s) return v;
  }
  if (s == "agenttrek") return Variant::agenttrek_baseline;
  return std::nullopt;
}

StageStats StageStats::from(const AttemptStats& s) {
  return {s.attempts, static_cast<long long>(s.elapsed().count()), s.usage.input_tokens, s.usage.output_tokens};
}

void validate_report(const EvaluationReport& r) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(!r.task_id.empty(), "report has no task_id");
  const bool wants_seg = r.variant == Variant::full || r.variant == Variant::no_diag || r.variant == Variant::no_sum;
  const bool wants_diag = r.variant == Variant::full || r.variant == Variant::no_seg || r.variant == Variant::no_sum;
  require(r.segmentation.has_value() == wants_seg, "segmentation presence does not match variant");
  require(r.diagnoses.has_value() == wants_diag, "diagnoses presence does not match variant");
  require(r.subtask_verdicts.has_value() == (r.variant == Variant::no_diag),
          "subtask verdict presence does not match variant");
  if (r.segmentation) {
    r.segmentation->validate(r.trajectory_length);
    if (r.diagnoses) require(r.diagnoses->size() == r.segmentation->k(), "one diagnosis per subtask required");
    if (r.subtask_verdicts) require(r.subtask_verdicts->size() == r.segmentation->k(), "one verdict per subtask required");
  }
  if (r.variant == Variant::no_seg) require(r.diagnoses->size() == 1, "no_seg carries a single diagnosis");
  if (r.diagnoses) {
    for (const auto& d : *r.diagnoses) {
      require(!d.reasoning.empty(), "diagnosis without reasoning");
      require(d.verdict == Verdict::success || !d.error_analysis.empty(), "non-success diagnosis without analysis");
    }
  }
  if (r.final.derived_from == DerivedFrom::model_summary) {
    require(!r.final.justification.empty(), "model summary without justification");
  }
}

namespace {

ordered_json flags_json(const ReportFlags& f) {
  return {{"images_available", f.images_available},
          {"text_only", f.text_only},
          {"missing_screenshots", f.missing_screenshots},
          {"segmentation_repaired", f.segmentation_repaired},
          {"segmentation_fallback", f.segmentation_fallback},
          {"diagnoses_repaired", f.diagnoses_repaired},
          {"summary_fallback", f.summary_fallback},
          {"evaluator_error", f.evaluator_error}};
}

}  // namespace

ordered_json to_json(const EvaluationReport& r) {
  ordered_json j;
  j["task_id"] = r.task_id;
  j["instruction"] = r.instruction;
  j["variant"] = to_string(r.variant);
  j["trajectory_length"] = r.trajectory_length;
  if (r.segmentation) j["segmentation"] = to_json(*r.segmentation);
  if (r.diagnoses) {
    ordered_json arr = ordered_json::array();
    for (const auto& d : *r.diagnoses) arr.push_back(to_json(d));
    j["diagnoses"] = std::move(arr);
  }
  if (r.subtask_verdicts) {
    ordered_json arr = ordered_json::array();
    for (const auto& v : *r.subtask_verdicts) arr.push_back(to_json(v));
    j["subtask_verdicts"] = std::move(arr);
  }
  j["final"] = to_json(r.final);
  ordered_json stages = ordered_json::object();
  for (const auto& [name, s] : r.stages) {
    stages[name] = {{"attempts", s.attempts},
                    {"elapsed_ms", s.elapsed_ms},
                    {"input_tokens", s.input_tokens},
                    {"output_tokens", s.output_tokens}};
  }
  j["stages"] = std::move(stages);
  j["flags"] = flags_json(r.flags);
  j["provenance"] = {{"config_fingerprint", r.provenance.config_fingerprint},
                     {"prompt_hashes", r.provenance.prompt_hashes},
                     {"backend", r.provenance.backend},
                     {"seed", r.provenance.seed}};
  j["notes"] = r.notes;
  return j;
}

EvaluationReport report_from_json(const ordered_json& j) {
  EvaluationReport r;
  r.task_id = j.at("task_id").get<std::string>();
  r.instruction = j.value("instruction", "");
  auto v = variant_from_string(j.at("variant").get<std::string>());
  if (!v) throw std::invalid_argument("unknown variant in report");
  r.variant = *v;
  r.trajectory_length = j.value("trajectory_length", std::size_t{0});
  if (j.contains("segmentation")) r.segmentation = segmentation_from_json(j["segmentation"]);
  if (j.contains("diagnoses")) {
    r.diagnoses.emplace();
    for (const auto& d : j["diagnoses"]) r.diagnoses->push_back(diagnosis_from_json(d));
  }
  if (j.contains("subtask_verdicts")) {
    r.subtask_verdicts.emplace();
    for (const auto& s : j["subtask_verdicts"]) r.subtask_verdicts->push_back(subtask_verdict_from_json(s));
  }
  r.final = final_verdict_from_json(j.at("final"));
  const ordered_json stages = j.value("stages", ordered_json::object());
  for (const auto& [name, s] : stages.items()) {
    r.stages[name] = {s.value("attempts", 0), s.value("elapsed_ms", 0LL), s.value("input_tokens", 0LL),
                      s.value("output_tokens", 0LL)};
  }
  if (j.contains("flags")) {
    const auto& f = j["flags"];
    r.flags.images_available = f.value("images_available", false);
    r.flags.text_only = f.value("text_only", false);
    r.flags.missing_screenshots = f.value("missing_screenshots", std::size_t{0});
    r.flags.segmentation_repaired = f.value("segmentation_repaired", false);
    r.flags.segmentation_fallback = f.value("segmentation_fallback", false);
    r.flags.diagnoses_repaired = f.value("diagnoses_repaired", false);
    r.flags.summary_fallback = f.value("summary_fallback", false);
    r.flags.evaluator_error = f.value("evaluator_error", false);
  }
  if (j.contains("provenance")) {
    const auto& p = j["provenance"];
    r.provenance.config_fingerprint = p.value("config_fingerprint", "");
    r.provenance.prompt_hashes = p.value("prompt_hashes", std::map<std::string, std::string>{});
    r.provenance.backend = p.value("backend", "");
    r.provenance.seed = p.value("seed", 0ULL);
  }
  r.notes = j.value("notes", std::vector<std::string>{});
  return r;
}

std::vector<EvaluationReport> load_reports(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open reports file " + path);
  std::vector<EvaluationReport> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(report_from_json(ordered_json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path + ":" + std::to_string(n) + ": bad report record: " + e.what());
    }
  }
  return out;
}

}  // namespace trajeval
