#include "trajeval/trajectory.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "trajeval/errors.hpp"

namespace trajeval {
namespace fs = std::filesystem;
using nlohmann::json;

bool Trajectory::images_complete() const {
  return std::all_of(steps.begin(), steps.end(), [](const Step& s) { return s.screenshot_ref.has_value(); });
}

bool Trajectory::any_images() const {
  return initial_screenshot_ref.has_value() ||
         std::any_of(steps.begin(), steps.end(), [](const Step& s) { return s.screenshot_ref.has_value(); });
}

std::optional<std::string> Trajectory::final_screenshot() const {
  if (steps.empty()) return initial_screenshot_ref;
  return steps.back().screenshot_ref;
}

void Trajectory::validate() const {
  if (steps.empty()) throw std::invalid_argument("trajectory has no steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].index != i) throw std::invalid_argument("step index does not match position");
    if (steps[i].action_text.empty()) throw std::invalid_argument("empty action text");
  }
}

std::size_t Dataset::success_count() const {
  return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const TaskInstance& t) {
    return t.gold_label.has_value() && *t.gold_label;
  }));
}

std::size_t Dataset::failure_count() const {
  return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const TaskInstance& t) {
    return t.gold_label.has_value() && !*t.gold_label;
  }));
}

std::size_t Dataset::unlabeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [](const TaskInstance& t) { return !t.gold_label.has_value(); }));
}

const TaskInstance* Dataset::find(const std::string& task_id) const {
  for (const auto& t : items) {
    if (t.task_id == task_id) return &t;
  }
  return nullptr;
}

namespace {

[[noreturn]] void fail_at(std::size_t line, const std::string& what) {
  throw DatasetError("line " + std::to_string(line) + ": " + what);
}

std::optional<std::string> optional_string(const json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) fail_at(line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::string resolve(const std::string& ref, const fs::path& base_dir) {
  fs::path p(ref);
  if (p.is_relative()) p = base_dir / p;
  return p.lexically_normal().string();
}

TaskInstance parse_record(const json& rec, std::size_t line, const fs::path& base_dir,
                          IndexConvention& convention) {
  if (!rec.is_object()) fail_at(line, "record is not an object");
  TaskInstance t;
  auto id = optional_string(rec, "task_id", line);
  if (!id || id->empty()) fail_at(line, "missing task_id");
  t.task_id = *id;
  auto instr = optional_string(rec, "instruction", line);
  if (!instr || instr->empty()) fail_at(line, "missing or empty instruction");
  t.instruction = *instr;
  if (auto it = rec.find("gold_label"); it != rec.end() && !it->is_null()) {
    if (!it->is_boolean()) fail_at(line, "gold_label must be a boolean");
    t.gold_label = it->get<bool>();
  }
  t.source_tag = optional_string(rec, "source_tag", line);
  if (auto s = optional_string(rec, "initial_screenshot", line)) {
    t.trajectory.initial_screenshot_ref = resolve(*s, base_dir);
  }

  auto steps_it = rec.find("steps");
  if (steps_it == rec.end() || !steps_it->is_array()) fail_at(line, "missing steps array");
  if (steps_it->empty()) fail_at(line, "trajectory has no steps");
  std::vector<std::pair<long long, Step>> declared;
  for (const auto& s : *steps_it) {
    if (!s.is_object()) fail_at(line, "step is not an object");
    auto idx = s.find("index");
    if (idx == s.end() || !idx->is_number_integer()) fail_at(line, "step index must be an integer");
    Step step;
    auto action = optional_string(s, "action", line);
    if (!action || action->empty()) fail_at(line, "step " + idx->dump() + " has an empty action");
    step.action_text = *action;
    if (auto shot = optional_string(s, "screenshot", line)) step.screenshot_ref = resolve(*shot, base_dir);
    declared.emplace_back(idx->get<long long>(), std::move(step));
  }
  std::sort(declared.begin(), declared.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const long long first = declared.front().first;
  if (first == 0) {
    convention = IndexConvention::zero_based;
  } else if (first == 1) {
    convention = IndexConvention::one_based;
  } else {
    fail_at(line, "step indices must start at 0 or 1, found " + std::to_string(first));
  }
  for (std::size_t i = 0; i < declared.size(); ++i) {
    if (declared[i].first != first + static_cast<long long>(i)) {
      fail_at(line, "step indices are not contiguous near index " + std::to_string(declared[i].first));
    }
    declared[i].second.index = i;
    t.trajectory.steps.push_back(std::move(declared[i].second));
  }
  return t;
}

void verify_images(const TaskInstance& t, std::size_t line) {
  auto check = [&](const std::optional<std::string>& ref) {
    if (ref && !fs::exists(*ref)) fail_at(line, "task '" + t.task_id + "': missing image " + *ref);
  };
  check(t.trajectory.initial_screenshot_ref);
  for (const auto& s : t.trajectory.steps) check(s.screenshot_ref);
}

}  // namespace

Dataset parse_dataset(const std::string& text, const fs::path& base_dir, const std::string& name,
                      const IngestOptions& options) {
  Dataset d;
  d.name = name;
  const fs::path abs_base = fs::absolute(base_dir);
  std::map<std::string, std::size_t> first_line;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(raw);
    } catch (const json::parse_error& e) {
      fail_at(line, std::string("malformed record: ") + e.what());
    }
    IndexConvention conv = IndexConvention::zero_based;
    TaskInstance t = parse_record(rec, line, abs_base, conv);
    if (auto [it, inserted] = first_line.emplace(t.task_id, line); !inserted) {
      fail_at(line, "duplicate task_id '" + t.task_id + "' (first seen on line " + std::to_string(it->second) +
                        ", again on line " + std::to_string(line) + ")");
    }
    if (options.verify_images) verify_images(t, line);
    d.index_conventions[t.task_id] = conv;
    d.items.push_back(std::move(t));
  }
  if (d.items.empty()) d.warnings.push_back("dataset '" + name + "' contains no records");
  return d;
}

Dataset load_dataset(const fs::path& path, const IngestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), path.parent_path(), path.stem().string(), options);
}

json task_to_json(const TaskInstance& task) {
  json rec = json::object();
  rec["task_id"] = task.task_id;
  rec["instruction"] = task.instruction;
  if (task.gold_label) rec["gold_label"] = *task.gold_label;
  if (task.source_tag) rec["source_tag"] = *task.source_tag;
  if (task.trajectory.initial_screenshot_ref) rec["initial_screenshot"] = *task.trajectory.initial_screenshot_ref;
  json steps = json::array();
  for (const auto& s : task.trajectory.steps) {
    json js = {{"index", s.index}, {"action", s.action_text}};
    if (s.screenshot_ref) js["screenshot"] = *s.screenshot_ref;
    steps.push_back(std::move(js));
  }
  rec["steps"] = std::move(steps);
  return rec;
}

std::string serialize_dataset(const Dataset& d) {
  std::string out;
  for (const auto& t : d.items) {
    out += task_to_json(t).dump();
    out += '\n';
  }
  return out;
}

StatsSummary dataset_stats(const Dataset& d) {
  StatsSummary s;
  s.total = d.items.size();
  s.success = d.success_count();
  s.failure = d.failure_count();
  s.unlabeled = d.unlabeled_count();
  if (const auto labeled = s.success + s.failure; labeled > 0) {
    s.success_pct = 100.0 * static_cast<double>(s.success) / static_cast<double>(labeled);
    s.failure_pct = 100.0 * static_cast<double>(s.failure) / static_cast<double>(labeled);
  }
  for (const auto& t : d.items) ++s.length_histogram[group_of_length(t.trajectory.length())];
  return s;
}

std::string action_transcript(const Trajectory& tr) {
  std::string out;
  for (std::size_t i = 0; i < tr.steps.size(); ++i) {
    if (i) out += '\n';
    std::string action = tr.steps[i].action_text;
    std::replace(action.begin(), action.end(), '\n', ' ');
    std::replace(action.begin(), action.end(), '\r', ' ');
    out += "Step " + std::to_string(i + 1) + ": " + action;
  }
  return out;
}

}  // namespace trajeval
