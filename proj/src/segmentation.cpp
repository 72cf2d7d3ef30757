#include "trajeval/segmentation.hpp"

#include <algorithm>
#include <stdexcept>

#include "trajeval/errors.hpp"

namespace trajeval {
using nlohmann::ordered_json;

std::size_t Segmentation::max_segment_length() const {
  std::size_t m = 0;
  for (const auto& s : subtasks) m = std::max(m, s.length());
  return m;
}

bool Segmentation::repaired() const {
  return std::any_of(subtasks.begin(), subtasks.end(), [](const SubtaskSpec& s) { return s.repaired; });
}

void Segmentation::validate(std::size_t n) const {
  if (boundaries.size() < 2) throw std::invalid_argument("segmentation needs at least one subtask");
  if (boundaries.front() != 0 || boundaries.back() != n) {
    throw std::invalid_argument("boundaries must start at 0 and end at n");
  }
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (boundaries[i] <= boundaries[i - 1]) throw std::invalid_argument("boundaries must be strictly increasing");
  }
  if (subtasks.size() + 1 != boundaries.size()) throw std::invalid_argument("subtask count does not match boundaries");
  for (std::size_t i = 0; i < subtasks.size(); ++i) {
    const auto& s = subtasks[i];
    if (s.index != i + 1) throw std::invalid_argument("subtask indices must be 1..k");
    if (s.description.empty()) throw std::invalid_argument("subtask description is empty");
    if (s.start_step != boundaries[i] + 1 || s.end_step != boundaries[i + 1]) {
      throw std::invalid_argument("subtask span disagrees with boundaries");
    }
  }
}

namespace {

std::string unnamed(std::size_t a, std::size_t b) {
  return "Unnamed subtask (steps " + std::to_string(a) + "–" + std::to_string(b) + ")";
}

}  // namespace

Segmentation make_segmentation(const std::vector<std::size_t>& boundaries, const std::vector<std::string>& descriptions) {
  Segmentation seg;
  seg.boundaries = boundaries;
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) {
    SubtaskSpec s;
    s.index = i + 1;
    s.start_step = boundaries[i] + 1;
    s.end_step = boundaries[i + 1];
    s.description = i < descriptions.size() ? descriptions[i] : unnamed(s.start_step, s.end_step);
    seg.subtasks.push_back(std::move(s));
  }
  return seg;
}

Segmentation normalize_boundaries(const std::vector<long long>& raw, std::size_t n,
                                  const std::vector<std::string>& raw_descriptions,
                                  const std::string& fallback_description) {
  if (n == 0) throw std::invalid_argument("normalize_boundaries: trajectory length must be >= 1");
  const std::string fallback = fallback_description.empty() ? unnamed(1, n) : fallback_description;
  std::vector<std::string> notes;
  bool boundary_repair = false;

  std::vector<std::size_t> b;
  for (long long v : raw) {
    if (v < 0 || static_cast<unsigned long long>(v) > n) {
      boundary_repair = true;
      notes.push_back("dropped out-of-range boundary " + std::to_string(v));
      continue;
    }
    b.push_back(static_cast<std::size_t>(v));
  }
  if (!std::is_sorted(b.begin(), b.end())) {
    boundary_repair = true;
    notes.emplace_back("sorted boundaries");
    std::sort(b.begin(), b.end());
  }
  if (auto last = std::unique(b.begin(), b.end()); last != b.end()) {
    boundary_repair = true;
    notes.emplace_back("dropped duplicate boundaries");
    b.erase(last, b.end());
  }
  if (b.empty() || b.front() != 0) {
    boundary_repair = true;
    notes.emplace_back("inserted boundary 0");
    b.insert(b.begin(), 0);
  }
  if (b.back() != n) {
    boundary_repair = true;
    notes.push_back("inserted final boundary " + std::to_string(n));
    b.push_back(n);
  }

  const bool no_descriptions =
      std::all_of(raw_descriptions.begin(), raw_descriptions.end(), [](const std::string& d) { return d.empty(); });
  if (raw.empty() || (b.size() == 2 && no_descriptions)) {
    Segmentation seg = make_segmentation({0, n}, {fallback});
    seg.subtasks[0].repaired = true;
    seg.repair_notes.emplace_back("no usable proposal: single segment spanning the whole trajectory");
    return seg;
  }

  const std::size_t k = b.size() - 1;
  std::vector<std::string> descriptions(raw_descriptions.begin(),
                                        raw_descriptions.begin() + std::min(k, raw_descriptions.size()));
  if (raw_descriptions.size() != k) {
    notes.push_back("description count " + std::to_string(raw_descriptions.size()) + " adjusted to " +
                    std::to_string(k));
  }
  Segmentation seg = make_segmentation(b, descriptions);
  for (std::size_t i = 0; i < k; ++i) {
    auto& s = seg.subtasks[i];
    if (s.description.empty()) {
      s.description = unnamed(s.start_step, s.end_step);
      s.repaired = true;
    }
    if (i >= raw_descriptions.size()) s.repaired = true;
    if (boundary_repair || raw_descriptions.size() > k) s.repaired = true;
  }
  seg.repair_notes = std::move(notes);
  return seg;
}

Segmentation enforce_max_segment(const Segmentation& seg, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("max segment length must be >= 1");
  if (seg.max_segment_length() <= max_len) return seg;
  Segmentation out;
  out.repair_notes = seg.repair_notes;
  out.boundaries.push_back(0);
  for (const auto& s : seg.subtasks) {
    const std::size_t len = s.length();
    const std::size_t pieces = (len + max_len - 1) / max_len;
    const std::size_t base = len / pieces;
    const std::size_t extra = len % pieces;
    std::size_t start = s.start_step;
    for (std::size_t j = 0; j < pieces; ++j) {
      const std::size_t size = base + (j < extra ? 1 : 0);
      SubtaskSpec piece = s;
      piece.index = out.subtasks.size() + 1;
      piece.start_step = start;
      piece.end_step = start + size - 1;
      if (pieces > 1) piece.description = s.description + " (part " + std::to_string(j + 1) + ")";
      out.subtasks.push_back(std::move(piece));
      out.boundaries.push_back(start + size - 1);
      start += size;
    }
    if (pieces > 1) {
      out.repair_notes.push_back("split subtask " + std::to_string(s.index) + " of " + std::to_string(len) +
                                 " steps into " + std::to_string(pieces) + " parts");
    }
  }
  return out;
}

namespace {

long long as_step(const Record& v, const char* field) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) return static_cast<long long>(v.get<double>());
  if (v.is_string()) {
    try {
      return std::stoll(v.get<std::string>());
    } catch (const std::exception&) {
    }
  }
  throw SchemaViolation(std::string("subtask ") + field + " is not an integer");
}

}  // namespace

Segmentation segmentation_from_record(const Record& rec, std::size_t n, const std::string& fallback_description) {
  auto it = rec.find("subtasks");
  if (it == rec.end() || !it->is_array()) throw SchemaViolation("segmentation record lacks a 'subtasks' array");

  struct Proposed {
    long long start;
    long long end;
    std::string description;
  };
  std::vector<Proposed> proposed;
  for (const auto& item : *it) {
    if (!item.is_object()) throw SchemaViolation("subtask entry is not an object");
    auto end = item.find("end_step");
    if (end == item.end()) throw SchemaViolation("subtask entry lacks end_step");
    Proposed p;
    p.end = as_step(*end, "end_step");
    p.start = item.contains("start_step") ? as_step(item["start_step"], "start_step") : -1;
    if (auto d = item.find("description"); d != item.end() && d->is_string()) p.description = d->get<std::string>();
    proposed.push_back(std::move(p));
  }

  std::vector<std::string> notes;
  if (!std::is_sorted(proposed.begin(), proposed.end(), [](const auto& a, const auto& b) { return a.end < b.end; })) {
    std::stable_sort(proposed.begin(), proposed.end(), [](const auto& a, const auto& b) { return a.end < b.end; });
    notes.emplace_back("reordered subtasks by end_step");
  }
  bool ranges_consistent = true;
  long long prev_end = 0;
  for (const auto& p : proposed) {
    if (p.start >= 0 && p.start != prev_end + 1) ranges_consistent = false;
    prev_end = p.end;
  }
  if (!ranges_consistent) notes.emplace_back("start_step values ignored: ranges had gaps or overlaps");

  std::vector<long long> raw;
  std::vector<std::string> descriptions;
  if (!proposed.empty()) raw.push_back(0);
  for (auto& p : proposed) {
    raw.push_back(p.end);
    descriptions.push_back(std::move(p.description));
  }
  Segmentation seg = normalize_boundaries(raw, n, descriptions, fallback_description);
  if (!notes.empty()) {
    for (auto& s : seg.subtasks) s.repaired = true;
    seg.repair_notes.insert(seg.repair_notes.begin(), notes.begin(), notes.end());
  }
  return seg;
}

ChatRequest build_segmentation_request(const TaskInstance& task, const PromptSet& prompts) {
  const auto& tpl = prompts.get(prompt_names::kSegment);
  ChatRequest req;
  req.stage = Stage::segment;
  req.system_text = tpl.system;
  req.user_parts.push_back(TextPart{render_template(
      tpl.user, {{"task_instruction", task.instruction}, {"action_transcript", action_transcript(task.trajectory)}})});
  return req;
}

SegmentationOutcome segment_trajectory(const TaskInstance& task, Backend& backend, const CallOptions& call,
                                       const PromptSet& prompts, std::size_t max_segment_len) {
  const std::size_t n = task.trajectory.length();
  if (n == 0) throw std::invalid_argument("cannot segment an empty trajectory");
  ChatRequest req = build_segmentation_request(task, prompts);
  call.apply(req);
  SegmentationOutcome out;
  Segmentation seg = complete_with_retry(
      backend, req, call.policy,
      [&](const ChatResponse& resp) {
        return segmentation_from_record(extract_structured(resp.text), n, task.instruction);
      },
      call.env, &out.stats);
  out.segmentation = enforce_max_segment(seg, max_segment_len);
  out.segmentation.validate(n);
  return out;
}

ordered_json to_json(const Segmentation& seg) {
  ordered_json j;
  j["boundaries"] = seg.boundaries;
  ordered_json subtasks = ordered_json::array();
  for (const auto& s : seg.subtasks) {
    subtasks.push_back({{"index", s.index},
                        {"description", s.description},
                        {"start_step", s.start_step},
                        {"end_step", s.end_step},
                        {"repaired", s.repaired}});
  }
  j["subtasks"] = std::move(subtasks);
  j["repair_notes"] = seg.repair_notes;
  return j;
}

Segmentation segmentation_from_json(const ordered_json& j) {
  Segmentation seg;
  seg.boundaries = j.at("boundaries").get<std::vector<std::size_t>>();
  for (const auto& s : j.at("subtasks")) {
    seg.subtasks.push_back({s.at("index").get<std::size_t>(), s.at("description").get<std::string>(),
                            s.at("start_step").get<std::size_t>(), s.at("end_step").get<std::size_t>(),
                            s.value("repaired", false)});
  }
  if (j.contains("repair_notes")) seg.repair_notes = j["repair_notes"].get<std::vector<std::string>>();
  return seg;
}

}  // namespace trajeval
