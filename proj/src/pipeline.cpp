#include "trajeval/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "trajeval/errors.hpp"
#include "trajeval/hashing.hpp"
#include "trajeval/mock_backend.hpp"
#include "trajeval/parallel.hpp"

namespace trajeval {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

std::vector<std::string> templates_for(Variant v) {
  switch (v) {
    case Variant::full:
    case Variant::no_sum: return {"segment", "diagnose", "summarize"};
    case Variant::no_seg: return {"diagnose", "summarize"};
    case Variant::no_diag: return {"segment", "diagnose_bare", "summarize"};
    case Variant::naive: return {"naive"};
    case Variant::agenttrek_baseline: return {"agenttrek"};
  }
  return {};
}

void PipelineConfig::validate() const {
  retry.validate();
  if (max_segment_len < 1) throw ConfigError("max_segment_len must be >= 1");
  if (task_parallelism < 1 || diagnosis_parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (image_max_dimension < 0) throw ConfigError("image_max_dimension must be >= 0");
  if (backend.kind != "mock" && backend.kind != "http") throw ConfigError("backend.kind must be 'mock' or 'http'");
  if (backend.kind == "http" && backend.http.model.empty()) throw ConfigError("backend.model is required for http");
  for (const auto& name : templates_for(variant)) prompts.check(name);
}

ordered_json PipelineConfig::to_json() const {
  ordered_json j;
  j["variant"] = to_string(variant);
  j["backend"] = {{"kind", backend.kind}};
  if (backend.kind == "http") {
    j["backend"]["endpoint"] = backend.http.endpoint;
    j["backend"]["model"] = backend.http.model;
    j["backend"]["token_env"] = backend.http.token_env;
    j["backend"]["timeout_seconds"] = backend.http.timeout_seconds;
  }
  j["retry"] = {{"max_attempts", retry.max_attempts},
                {"base_delay_ms", retry.base_delay.count()},
                {"factor", retry.factor},
                {"max_delay_ms", retry.max_delay.count()},
                {"jitter_fraction", retry.jitter_fraction}};
  ordered_json temps = ordered_json::object();
  for (const auto& [stage, t] : temperatures) temps[std::string(to_string(stage))] = t;
  j["temperatures"] = std::move(temps);
  if (max_output) j["max_output"] = *max_output;
  if (prompts_dir) j["prompts_dir"] = *prompts_dir;
  j["max_segment_len"] = max_segment_len;
  j["parallelism"] = {{"tasks", task_parallelism}, {"diagnoses", diagnosis_parallelism}};
  j["seed"] = seed;
  j["image_max_dimension"] = image_max_dimension;
  j["naive_text_only"] = naive_text_only;
  return j;
}

std::string PipelineConfig::fingerprint() const {
  ordered_json j = to_json();
  j.erase("parallelism");
  j.erase("prompts_dir");
  if (j["backend"].contains("token_env")) j["backend"].erase("token_env");
  if (j["backend"].contains("timeout_seconds")) j["backend"].erase("timeout_seconds");
  j["prompt_hashes"] = prompts.hashes();
  return sha256_hex(j.dump());
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

}  // namespace

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"variant", "backend", "retry", "temperatures", "max_output", "prompts_dir", "max_segment_len",
                  "parallelism", "seed", "image_max_dimension", "naive_text_only"},
                 "");
  PipelineConfig c;
  try {
    if (j.contains("variant")) {
      const auto name = j["variant"].get<std::string>();
      auto v = variant_from_string(name);
      if (!v) throw ConfigError("unknown variant '" + name + "'");
      c.variant = *v;
    }
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      reject_unknown(b, {"kind", "endpoint", "model", "token_env", "timeout_seconds"}, "backend.");
      c.backend.kind = b.value("kind", c.backend.kind);
      c.backend.http.endpoint = b.value("endpoint", c.backend.http.endpoint);
      c.backend.http.model = b.value("model", c.backend.http.model);
      c.backend.http.token_env = b.value("token_env", c.backend.http.token_env);
      c.backend.http.timeout_seconds = b.value("timeout_seconds", c.backend.http.timeout_seconds);
    }
    if (j.contains("retry")) {
      const auto& r = j["retry"];
      reject_unknown(r, {"max_attempts", "base_delay_ms", "factor", "max_delay_ms", "jitter_fraction"}, "retry.");
      c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
      c.retry.base_delay = Millis{r.value("base_delay_ms", c.retry.base_delay.count())};
      c.retry.factor = r.value("factor", c.retry.factor);
      c.retry.max_delay = Millis{r.value("max_delay_ms", c.retry.max_delay.count())};
      c.retry.jitter_fraction = r.value("jitter_fraction", c.retry.jitter_fraction);
    }
    if (j.contains("temperatures")) {
      for (const auto& [name, t] : j["temperatures"].items()) {
        auto stage = stage_from_string(name);
        if (!stage) throw ConfigError("unknown stage '" + name + "' in temperatures");
        c.temperatures[*stage] = t.get<double>();
      }
    }
    if (j.contains("max_output")) c.max_output = j["max_output"].get<int>();
    if (j.contains("prompts_dir")) {
      fs::path dir = j["prompts_dir"].get<std::string>();
      if (dir.is_relative() && !base_dir.empty()) dir = base_dir / dir;
      c.prompts_dir = dir.string();
      c.prompts = PromptSet::load_dir(dir);
    }
    c.max_segment_len = j.value("max_segment_len", c.max_segment_len);
    if (j.contains("parallelism")) {
      const auto& p = j["parallelism"];
      reject_unknown(p, {"tasks", "diagnoses"}, "parallelism.");
      c.task_parallelism = p.value("tasks", c.task_parallelism);
      c.diagnosis_parallelism = p.value("diagnoses", c.diagnosis_parallelism);
    }
    c.seed = j.value("seed", c.seed);
    c.image_max_dimension = j.value("image_max_dimension", c.image_max_dimension);
    c.naive_text_only = j.value("naive_text_only", c.naive_text_only);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return config_from_json(j, path.parent_path());
}

std::unique_ptr<Backend> make_backend(const BackendSettings& settings, const std::optional<fs::path>& mock_script) {
  if (mock_script) return MockBackend::load(*mock_script);
  if (settings.kind == "http") return std::make_unique<HttpBackend>(settings.http);
  throw ConfigError("mock backend selected but no mock script given");
}

// ---------------------------------------------------------------------------
// Single-call evaluators

namespace {

ChatRequest single_call_request(const TaskInstance& task, const PromptTemplate& tpl) {
  ChatRequest req;
  req.stage = Stage::baseline;
  req.system_text = tpl.system;
  req.user_parts.push_back(TextPart{render_template(
      tpl.user, {{"task_instruction", task.instruction}, {"action_transcript", action_transcript(task.trajectory)}})});
  return req;
}

bool attach_image(ChatRequest& req, const ImageLoader& images, const std::optional<std::string>& ref) {
  if (!ref) return false;
  auto img = images.load(*ref);
  if (!img) return false;
  req.user_parts.emplace_back(std::move(*img));
  return true;
}

SingleCallOutcome run_single_call(ChatRequest req, std::size_t missing, Backend& backend, const CallOptions& call,
                                  DerivedFrom derived_from) {
  call.apply(req);
  SingleCallOutcome out;
  out.images_sent = req.image_count();
  out.missing_screenshots = missing;
  out.verdict = complete_with_retry(
      backend, req, call.policy,
      [derived_from](const ChatResponse& resp) {
        return final_verdict_from_record(extract_structured(resp.text), derived_from);
      },
      call.env, &out.stats);
  return out;
}

}  // namespace

ChatRequest build_agenttrek_request(const TaskInstance& task, const PromptSet& prompts, const ImageLoader& images,
                                    std::size_t* missing) {
  ChatRequest req = single_call_request(task, prompts.get(prompt_names::kAgentTrek));
  req.user_parts.push_back(TextPart{"Final screen:"});
  if (!attach_image(req, images, task.trajectory.final_screenshot())) {
    req.user_parts.back() = TextPart{"[no final screenshot available; judge from the action sequence]"};
    if (missing) *missing = 1;
  }
  return req;
}

SingleCallOutcome agenttrek_baseline(const TaskInstance& task, Backend& backend, const CallOptions& call,
                                     const PromptSet& prompts, const ImageLoader& images) {
  std::size_t missing = 0;
  return run_single_call(build_agenttrek_request(task, prompts, images, &missing), missing, backend, call,
                         DerivedFrom::baseline);
}

ChatRequest build_naive_request(const TaskInstance& task, const PromptSet& prompts, const ImageLoader& images,
                                bool text_only, std::size_t* missing) {
  ChatRequest req = single_call_request(task, prompts.get(prompt_names::kNaive));
  if (text_only) return req;
  std::size_t absent = 0;
  const auto& tr = task.trajectory;
  if (tr.initial_screenshot_ref) {
    req.user_parts.push_back(TextPart{"Initial screen:"});
    if (!attach_image(req, images, tr.initial_screenshot_ref)) {
      req.user_parts.back() = TextPart{"[no initial screenshot]"};
      ++absent;
    }
  }
  for (std::size_t i = 0; i < tr.steps.size(); ++i) {
    req.user_parts.push_back(TextPart{"Screen after step " + std::to_string(i + 1) + ":"});
    if (!attach_image(req, images, tr.steps[i].screenshot_ref)) {
      req.user_parts.back() = TextPart{"[no screenshot for step " + std::to_string(i + 1) + "]"};
      ++absent;
    }
  }
  if (missing) *missing = absent;
  return req;
}

SingleCallOutcome naive_evaluate(const TaskInstance& task, Backend& backend, const CallOptions& call,
                                 const PromptSet& prompts, const ImageLoader& images, bool text_only) {
  std::size_t missing = 0;
  return run_single_call(build_naive_request(task, prompts, images, text_only, &missing), missing, backend, call,
                         DerivedFrom::naive_call);
}

// ---------------------------------------------------------------------------
// Variant dispatch

namespace {

struct TaskContext {
  const TaskInstance& task;
  const PipelineConfig& config;
  Backend& backend;
  CallOptions call;
  ImageLoader images;
  EvaluationReport report;
};

Segmentation run_segmentation(TaskContext& ctx) {
  try {
    auto out = segment_trajectory(ctx.task, ctx.backend, ctx.call, ctx.config.prompts, ctx.config.max_segment_len);
    ctx.report.stages["segment"] = StageStats::from(out.stats);
    ctx.report.flags.segmentation_repaired = out.segmentation.repaired();
    return std::move(out.segmentation);
  } catch (const RetriesExhausted& e) {
    const std::size_t n = ctx.task.trajectory.length();
    Segmentation seg = enforce_max_segment(normalize_boundaries({}, n, {}, ctx.task.instruction),
                                           ctx.config.max_segment_len);
    seg.repair_notes.push_back(std::string("segmentation failed: ") + e.what());
    ctx.report.stages["segment"] = StageStats{e.attempts(), 0, 0, 0};
    ctx.report.flags.segmentation_fallback = true;
    ctx.report.flags.segmentation_repaired = true;
    ctx.report.flags.evaluator_error = true;
    ctx.report.notes.push_back("segmentation unavailable; evaluated as a single segment");
    return seg;
  }
}

void record_diagnoses(TaskContext& ctx, DiagnosesOutcome& out) {
  ctx.report.stages["diagnose"] = StageStats::from(out.stats);
  std::size_t images = 0;
  for (const auto& d : out.diagnoses) {
    images += d.images_sent;
    ctx.report.flags.missing_screenshots += d.missing_screenshots;
    ctx.report.flags.diagnoses_repaired = ctx.report.flags.diagnoses_repaired || d.repaired;
    if (d.evaluator_error) {
      ctx.report.flags.evaluator_error = true;
      ctx.report.notes.push_back("subtask " + std::to_string(d.subtask_index) + ": evaluator error");
    }
  }
  ctx.report.flags.text_only = ctx.report.flags.text_only && images == 0;
}

void record_summary(TaskContext& ctx, SummaryOutcome& out) {
  ctx.report.stages["summarize"] = StageStats::from(out.stats);
  if (out.verdict.fallback) {
    ctx.report.flags.summary_fallback = true;
    ctx.report.flags.evaluator_error = true;
  }
  ctx.report.final = std::move(out.verdict);
}

void record_single_call(TaskContext& ctx, const char* stage, DerivedFrom derived_from,
                        const std::function<SingleCallOutcome()>& run) {
  try {
    auto out = run();
    ctx.report.stages[stage] = StageStats::from(out.stats);
    ctx.report.flags.text_only = out.images_sent == 0;
    ctx.report.flags.missing_screenshots = out.missing_screenshots;
    ctx.report.final = std::move(out.verdict);
  } catch (const RetriesExhausted& e) {
    ctx.report.stages[stage] = StageStats{e.attempts(), 0, 0, 0};
    ctx.report.flags.evaluator_error = true;
    ctx.report.final.success = false;
    ctx.report.final.derived_from = derived_from;
    ctx.report.final.justification = std::string("evaluator error: ") + e.what();
  }
  if (ctx.report.flags.text_only) ctx.report.notes.push_back("no screenshots were sent; text-only judgment");
}

}  // namespace

EvaluationReport evaluate(const TaskInstance& task, const PipelineConfig& config, Backend& backend,
                          const RetryEnv& env) {
  task.trajectory.validate();
  TaskContext ctx{task, config, backend, {config.retry, env, config.temperatures, config.max_output},
                  ImageLoader(config.image_max_dimension), {}};
  auto& r = ctx.report;
  r.task_id = task.task_id;
  r.instruction = task.instruction;
  r.variant = config.variant;
  r.trajectory_length = task.trajectory.length();
  r.flags.images_available = task.trajectory.any_images();
  r.flags.text_only = true;
  r.provenance = {config.fingerprint(), config.prompts.hashes(), backend.name(), config.seed};
  const auto& prompts = config.prompts;
  const std::size_t fan_out = config.diagnosis_parallelism;

  switch (config.variant) {
    case Variant::full: {
      Segmentation seg = run_segmentation(ctx);
      auto diag = diagnose_all(task, seg, backend, ctx.call, prompts, ctx.images, fan_out);
      record_diagnoses(ctx, diag);
      auto sum = summarize(task, seg, diag.diagnoses, backend, ctx.call, prompts);
      record_summary(ctx, sum);
      r.segmentation = std::move(seg);
      r.diagnoses = std::move(diag.diagnoses);
      break;
    }
    case Variant::no_seg: {
      const std::size_t n = task.trajectory.length();
      Segmentation whole = make_segmentation({0, n}, {task.instruction});
      auto diag = diagnose_all(task, whole, backend, ctx.call, prompts, ctx.images, 1);
      record_diagnoses(ctx, diag);
      auto sum = summarize(task, whole, diag.diagnoses, backend, ctx.call, prompts);
      record_summary(ctx, sum);
      r.diagnoses = std::move(diag.diagnoses);
      break;
    }
    case Variant::no_diag: {
      Segmentation seg = run_segmentation(ctx);
      auto verdicts = verdict_all(task, seg, backend, ctx.call, prompts, ctx.images, fan_out);
      r.stages["diagnose"] = StageStats::from(verdicts.stats);
      for (const auto& v : verdicts.verdicts) {
        if (v.evaluator_error) r.flags.evaluator_error = true;
        r.flags.diagnoses_repaired = r.flags.diagnoses_repaired || v.repaired;
      }
      r.flags.missing_screenshots += verdicts.missing_screenshots;
      r.flags.text_only = verdicts.images_sent == 0;
      auto sum = summarize(task, seg, verdicts.verdicts, backend, ctx.call, prompts);
      record_summary(ctx, sum);
      r.segmentation = std::move(seg);
      r.subtask_verdicts = std::move(verdicts.verdicts);
      break;
    }
    case Variant::no_sum: {
      Segmentation seg = run_segmentation(ctx);
      auto diag = diagnose_all(task, seg, backend, ctx.call, prompts, ctx.images, fan_out);
      record_diagnoses(ctx, diag);
      r.final = aggregate_hard_rule(diag.diagnoses);
      r.segmentation = std::move(seg);
      r.diagnoses = std::move(diag.diagnoses);
      break;
    }
    case Variant::naive:
      record_single_call(ctx, "naive", DerivedFrom::naive_call, [&] {
        return naive_evaluate(task, backend, ctx.call, prompts, ctx.images, config.naive_text_only);
      });
      break;
    case Variant::agenttrek_baseline:
      record_single_call(ctx, "agenttrek", DerivedFrom::baseline,
                         [&] { return agenttrek_baseline(task, backend, ctx.call, prompts, ctx.images); });
      break;
  }
  if (r.flags.text_only && r.flags.images_available && config.variant != Variant::naive) {
    r.notes.push_back("screenshots referenced but none could be loaded");
  }
  validate_report(r);
  return std::move(ctx.report);
}

// ---------------------------------------------------------------------------
// Dataset runs

ordered_json RunManifest::to_json() const {
  ordered_json failures_json = ordered_json::array();
  for (const auto& f : failures) failures_json.push_back({{"task_id", f.task_id}, {"error", f.error}});
  return {{"dataset", dataset},
          {"variant", variant},
          {"config_fingerprint", config_fingerprint},
          {"prompt_hashes", prompt_hashes},
          {"backend", backend},
          {"seed", seed},
          {"counts",
           {{"total", total},
            {"completed", completed},
            {"evaluated", evaluated},
            {"skipped_resumed", skipped_resumed},
            {"evaluator_errors", evaluator_errors},
            {"failed", failures.size()}}},
          {"failures", std::move(failures_json)}};
}

namespace {

/// Task ids already in the reports file. A torn final line from an interrupted run is cut off.
std::set<std::string> completed_task_ids(const fs::path& reports_path) {
  std::set<std::string> done;
  if (!fs::exists(reports_path)) return done;
  std::ifstream in(reports_path, std::ios::binary);
  std::string line;
  std::uintmax_t good_bytes = 0;
  bool torn = false;
  while (std::getline(in, line)) {
    if (in.eof()) {
      // No trailing newline: the writer was interrupted mid-record.
      torn = true;
      break;
    }
    auto rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("task_id")) {
      torn = true;
      break;
    }
    done.insert(rec["task_id"].get<std::string>());
    good_bytes += line.size() + 1;
  }
  in.close();
  if (torn) fs::resize_file(reports_path, good_bytes);
  return done;
}

std::optional<std::string> last_manifest_fingerprint(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) return std::nullopt;
  std::optional<std::string> fp;
  std::string line;
  while (std::getline(in, line)) {
    auto rec = json::parse(line, nullptr, false);
    if (!rec.is_discarded() && rec.contains("config_fingerprint")) fp = rec["config_fingerprint"].get<std::string>();
  }
  return fp;
}

}  // namespace

RunManifest evaluate_dataset(const Dataset& dataset, const PipelineConfig& config, Backend& backend,
                             const fs::path& out_dir, const RetryEnv& env, const RunOptions& options) {
  if (dataset.items.empty()) throw DatasetError("dataset '" + dataset.name + "' is empty");
  config.validate();
  fs::create_directories(out_dir);
  const fs::path reports_path = out_dir / kReportsFile;
  const fs::path manifest_path = out_dir / kManifestFile;

  RunManifest manifest;
  manifest.dataset = dataset.name;
  manifest.variant = std::string(to_string(config.variant));
  manifest.config_fingerprint = config.fingerprint();
  manifest.prompt_hashes = config.prompts.hashes();
  manifest.backend = backend.name();
  manifest.seed = config.seed;
  manifest.total = dataset.items.size();

  const auto done = completed_task_ids(reports_path);
  if (!done.empty()) {
    const auto previous = last_manifest_fingerprint(manifest_path);
    if (previous && *previous != manifest.config_fingerprint) {
      throw ConfigError("output directory " + out_dir.string() +
                        " holds reports from a different configuration; use a fresh directory");
    }
  }

  std::vector<const TaskInstance*> pending;
  for (const auto& t : dataset.items) {
    if (done.count(t.task_id)) {
      ++manifest.skipped_resumed;
    } else if (!options.max_tasks || pending.size() < *options.max_tasks) {
      pending.push_back(&t);
    }
  }

  std::ofstream out(reports_path, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot write " + reports_path.string());

  // Completed tasks are committed strictly in dataset order so output is independent of scheduling.
  std::mutex mu;
  std::vector<std::optional<EvaluationReport>> results(pending.size());
  std::vector<bool> finished(pending.size(), false);
  std::size_t next_commit = 0;
  auto commit_ready = [&] {
    while (next_commit < pending.size() && finished[next_commit]) {
      if (auto& r = results[next_commit]) {
        out << to_json(*r).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
        out.flush();
        ++manifest.evaluated;
        if (r->flags.evaluator_error) ++manifest.evaluator_errors;
        if (options.on_report) options.on_report(*r);
        r.reset();
      }
      ++next_commit;
    }
  };

  parallel_for(pending.size(), config.task_parallelism, [&](std::size_t i) {
    std::optional<EvaluationReport> report;
    std::optional<TaskFailure> failure;
    try {
      report = evaluate(*pending[i], config, backend, env);
    } catch (const std::exception& e) {
      failure = TaskFailure{pending[i]->task_id, e.what()};
    }
    std::lock_guard lock(mu);
    results[i] = std::move(report);
    if (failure) manifest.failures.push_back(std::move(*failure));
    finished[i] = true;
    commit_ready();
  });
  out.close();

  std::sort(manifest.failures.begin(), manifest.failures.end(),
            [](const TaskFailure& a, const TaskFailure& b) { return a.task_id < b.task_id; });
  manifest.completed = manifest.skipped_resumed + manifest.evaluated;

  std::ofstream mf(manifest_path, std::ios::app | std::ios::binary);
  if (!mf) throw Error("cannot write " + manifest_path.string());
  mf << manifest.to_json().dump() << '\n';
  return manifest;
}

}  // namespace trajeval
