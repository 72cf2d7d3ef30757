#pragma once

#include <string>

#include "trajeval/report.hpp"

namespace trajeval {

/// Markdown rendering of one machine report. Subtask verdicts appear as `[SUCCESS]`,
/// `[PARTIAL]` and `[FAIL]` badges, one per subtask and nowhere else.
std::string render_report(const EvaluationReport& r);

/// File-system safe name for a task's rendering.
std::string rendering_filename(const std::string& task_id);

}  // namespace trajeval
