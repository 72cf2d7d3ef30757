#include "trajeval/render.hpp"

#include <cctype>
#include <sstream>

#include "trajeval/hashing.hpp"

namespace trajeval {
namespace {

std::string cell(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '|') {
      out += "\\|";
    } else if (c == '\n' || c == '\r') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out.empty() ? "-" : out;
}

std::string badge(Verdict v) {
  switch (v) {
    case Verdict::success: return "`[SUCCESS]`";
    case Verdict::partial: return "`[PARTIAL]`";
    case Verdict::fail: return "`[FAIL]`";
  }
  return "`[FAIL]`";
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

void render_diagnosis(std::ostringstream& out, const SubtaskDiagnosis& d, const std::string& heading) {
  out << "### " << heading << ' ' << badge(d.verdict) << "\n\n";
  if (d.evaluator_error) out << "> Evaluator error: this diagnosis is synthetic.\n\n";
  out << "**Reasoning.** " << d.reasoning << "\n\n";
  if (!d.error_analysis.empty()) out << "**Error analysis.** " << d.error_analysis << "\n\n";
  if (d.issues.empty()) {
    out << "No step-level issues.\n\n";
  } else {
    out << "| Step | Problem | Root cause | Suggested fix |\n|---|---|---|---|\n";
    for (const auto& i : d.issues) {
      out << "| " << i.step_index << (i.clamped ? "*" : "") << " | " << cell(i.problem) << " | "
          << cell(i.root_cause) << " | " << cell(i.suggested_fix) << " |\n";
    }
    out << '\n';
    if (d.repaired) out << "_Entries marked * were moved into the subtask's step range._\n\n";
  }
  out << "Screenshots sent: " << d.images_sent << ", missing: " << d.missing_screenshots << "\n\n";
}

}  // namespace

std::string render_report(const EvaluationReport& r) {
  std::ostringstream out;
  out << "# Evaluation report: " << r.task_id << "\n\n";
  if (!r.instruction.empty()) out << "**Task.** " << r.instruction << "\n\n";
  out << "- Variant: " << to_string(r.variant) << '\n';
  out << "- Trajectory length: " << r.trajectory_length << " steps\n";
  out << "- Outcome: **" << (r.final.success ? "TASK SUCCEEDED" : "TASK FAILED") << "** (" << to_string(r.final.derived_from)
      << (r.final.fallback ? ", fallback" : "") << ")\n\n";

  out << "## Final judgment\n\n" << r.final.justification << "\n\n";
  if (!r.final.reasoning.empty()) out << "**Reasoning.** " << r.final.reasoning << "\n\n";

  if (r.segmentation && r.diagnoses) {
    out << "## Subtasks (" << r.segmentation->k() << ")\n\n";
    for (std::size_t i = 0; i < r.segmentation->k(); ++i) {
      const auto& s = r.segmentation->subtasks[i];
      std::string heading = std::to_string(s.index) + ". " + s.description + " (steps " +
                            std::to_string(s.start_step) + "–" + std::to_string(s.end_step) + ")";
      if (s.repaired) heading += " (repaired)";
      render_diagnosis(out, (*r.diagnoses)[i], heading);
    }
  } else if (r.diagnoses) {
    out << "## Whole-trajectory diagnosis\n\n";
    for (const auto& d : *r.diagnoses) {
      render_diagnosis(out, d, "Steps 1–" + std::to_string(r.trajectory_length));
    }
  } else if (r.segmentation && r.subtask_verdicts) {
    out << "## Subtasks (" << r.segmentation->k() << ", binary verdicts)\n\n";
    for (std::size_t i = 0; i < r.segmentation->k(); ++i) {
      const auto& s = r.segmentation->subtasks[i];
      const auto& v = (*r.subtask_verdicts)[i];
      out << "### " << s.index << ". " << s.description << " (steps " << s.start_step << "–" << s.end_step << ") "
          << badge(v.success ? Verdict::success : Verdict::fail) << "\n\n";
      if (v.evaluator_error) out << "> Evaluator error: this verdict is synthetic.\n\n";
      out << "**Reasoning.** " << v.reasoning << "\n\n";
    }
  }
  if (r.segmentation && !r.segmentation->repair_notes.empty()) {
    out << "## Segmentation repairs\n\n";
    for (const auto& n : r.segmentation->repair_notes) out << "- " << n << '\n';
    out << '\n';
  }

  out << "## Flags\n\n";
  out << "- Screenshots referenced: " << yes_no(r.flags.images_available) << '\n';
  out << "- Text-only judgment: " << yes_no(r.flags.text_only) << '\n';
  out << "- Missing screenshots: " << r.flags.missing_screenshots << '\n';
  out << "- Segmentation repaired: " << yes_no(r.flags.segmentation_repaired) << '\n';
  out << "- Segmentation fallback: " << yes_no(r.flags.segmentation_fallback) << '\n';
  out << "- Diagnoses repaired: " << yes_no(r.flags.diagnoses_repaired) << '\n';
  out << "- Summary fallback: " << yes_no(r.flags.summary_fallback) << '\n';
  out << "- Evaluator error: " << yes_no(r.flags.evaluator_error) << "\n\n";
  if (!r.notes.empty()) {
    out << "Notes:\n";
    for (const auto& n : r.notes) out << "- " << n << '\n';
    out << '\n';
  }

  out << "## Stages\n\n| Stage | Attempts | Elapsed (ms) | Input tokens | Output tokens |\n|---|---|---|---|---|\n";
  for (const auto& [name, s] : r.stages) {
    out << "| " << name << " | " << s.attempts << " | " << s.elapsed_ms << " | " << s.input_tokens << " | "
        << s.output_tokens << " |\n";
  }
  out << "\n---\n\n";
  out << "Config fingerprint: `" << r.provenance.config_fingerprint << "`  \n";
  out << "Backend: " << r.provenance.backend << ", seed " << r.provenance.seed << "  \n";
  out << "Prompt versions:";
  for (const auto& [name, hash] : r.provenance.prompt_hashes) out << ' ' << name << '=' << hash.substr(0, 12);
  out << '\n';
  return out.str();
}

std::string rendering_filename(const std::string& task_id) {
  std::string name;
  for (char c : task_id) {
    const auto u = static_cast<unsigned char>(c);
    name += (std::isalnum(u) || c == '-' || c == '_' || c == '.') ? c : '_';
  }
  if (name.empty() || name[0] == '.') name.insert(name.begin(), '_');
  // Sanitized names could collide; disambiguate with the id's hash.
  if (name != task_id) name += "-" + sha256_hex(task_id).substr(0, 8);
  return name + ".md";
}

}  // namespace trajeval
