#include "trajeval/cli.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "trajeval/errors.hpp"
#include "trajeval/meta_eval.hpp"
#include "trajeval/mock_backend.hpp"
#include "trajeval/pipeline.hpp"
#include "trajeval/render.hpp"
#include "trajeval/seg_quality.hpp"
#include "trajeval/transcript.hpp"

namespace trajeval {
namespace fs = std::filesystem;

namespace {

struct EvaluateArgs {
  std::string dataset;
  std::string config;
  std::string out_dir;
  std::string variant;
  std::size_t parallelism = 0;
  std::optional<unsigned long long> seed;
  std::string mock_script;
  std::string transcript;
  std::size_t max_tasks = 0;
  bool verify_images = false;
};

struct MetaEvalArgs {
  std::string reports;
  std::string dataset;
  std::string out;
  bool exclude_errors = false;
  bool by_length = false;
  bool precision_only = false;
};

struct SegQualityArgs {
  std::string dataset;
  std::string config;
  std::string reports;
  std::string mock_script;
  std::string human_labels;
  std::string out_dir;
};

PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << content;
}

int render_all(const fs::path& reports_path, const fs::path& dir) {
  fs::create_directories(dir);
  int n = 0;
  for (const auto& r : load_reports(reports_path.string())) {
    write_file(dir / rendering_filename(r.task_id), render_report(r));
    ++n;
  }
  return n;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  PipelineConfig config = config_or_default(a.config);
  if (!a.variant.empty()) {
    auto v = variant_from_string(a.variant);
    if (!v) throw ConfigError("unknown variant '" + a.variant + "'");
    config.variant = *v;
  }
  if (a.parallelism) config.task_parallelism = config.diagnosis_parallelism = a.parallelism;
  if (a.seed) config.seed = *a.seed;
  config.validate();

  Dataset dataset = load_dataset(a.dataset, IngestOptions{a.verify_images});
  std::optional<fs::path> script;
  if (!a.mock_script.empty()) script = a.mock_script;
  auto backend = make_backend(config.backend, script);

  // A scripted backend answers instantly; waiting out real backoff against it gains nothing.
  VirtualClock virtual_clock;
  RealSleeper real_sleeper;
  std::optional<TranscriptSink> transcript;
  if (!a.transcript.empty()) transcript.emplace(a.transcript);
  RetryEnv env{script ? static_cast<Sleeper*>(&virtual_clock) : &real_sleeper,
               transcript ? &*transcript : nullptr, config.seed};

  RunOptions options;
  if (a.max_tasks) options.max_tasks = a.max_tasks;
  const fs::path out_dir = a.out_dir;
  RunManifest m = evaluate_dataset(dataset, config, *backend, out_dir, env, options);
  const int rendered = render_all(out_dir / kReportsFile, out_dir / "renderings");

  out << "evaluated " << m.evaluated << " task(s), resumed " << m.skipped_resumed << ", failed " << m.failures.size()
      << ", evaluator errors " << m.evaluator_errors << '\n';
  out << "reports: " << (out_dir / kReportsFile).string() << '\n';
  out << "renderings: " << rendered << " in " << (out_dir / "renderings").string() << '\n';
  for (const auto& f : m.failures) out << "failed: " << f.task_id << ": " << f.error << '\n';
  return 0;
}

int cmd_meta_eval(const MetaEvalArgs& a, std::ostream& out) {
  Dataset dataset = load_dataset(a.dataset);
  auto reports = load_reports(a.reports);
  GroupTable table = metrics_by_group(reports, dataset, MetaEvalOptions{a.exclude_errors});
  out << render_metrics_table(table, a.by_length, a.precision_only);
  const fs::path dest = a.out.empty() ? fs::path(a.reports).parent_path() / "metrics.json" : fs::path(a.out);
  write_file(dest, to_json(table).dump(2) + "\n");
  out << "metrics written to " << dest.string() << '\n';
  return 0;
}

int cmd_seg_quality(const SegQualityArgs& a, std::ostream& out) {
  PipelineConfig config = config_or_default(a.config);
  config.prompts.check(std::string(prompt_names::kSegQuality));
  Dataset dataset = load_dataset(a.dataset);
  std::optional<fs::path> script;
  if (!a.mock_script.empty()) script = a.mock_script;
  auto backend = make_backend(config.backend, script);
  VirtualClock virtual_clock;
  RealSleeper real_sleeper;
  RetryEnv env{script ? static_cast<Sleeper*>(&virtual_clock) : &real_sleeper, nullptr, config.seed};
  CallOptions call{config.retry, env, config.temperatures, config.max_output};
  ImageLoader images(config.image_max_dimension);

  std::map<std::string, Segmentation> known;
  if (!a.reports.empty()) {
    for (auto& r : load_reports(a.reports)) {
      if (r.segmentation) known.emplace(r.task_id, std::move(*r.segmentation));
    }
  }

  std::vector<SegQualityScore> scores;
  for (const auto& task : dataset.items) {
    Segmentation seg;
    if (auto it = known.find(task.task_id); it != known.end()) {
      seg = it->second;
    } else {
      try {
        seg = segment_trajectory(task, *backend, call, config.prompts, config.max_segment_len).segmentation;
      } catch (const RetriesExhausted& e) {
        out << "skipped " << task.task_id << ": segmentation failed: " << e.what() << '\n';
        continue;
      }
    }
    for (std::size_t i = 1; i <= seg.k(); ++i) {
      scores.push_back(score_subtask(task, seg, i, *backend, call, config.prompts, images));
    }
  }

  ScoreDistribution dist = score_distribution(scores);
  out << render_distribution(dist);
  nlohmann::ordered_json summary = {{"distribution", to_json(dist)}};

  if (!a.human_labels.empty()) {
    auto agreement = agreement_vs_human(scores, load_human_labels(a.human_labels));
    out << "Cohen's kappa vs human labels: " << format_pct(agreement.kappa.kappa, 3) << " over " << agreement.matched
        << " subtasks\n";
    if (agreement.kappa.degenerate) out << "warning: degenerate label marginals\n";
    if (!agreement.unmatched_scores.empty() || !agreement.unmatched_labels.empty()) {
      out << "unmatched: " << agreement.unmatched_scores.size() << " scored subtask(s) without a label, "
          << agreement.unmatched_labels.size() << " label(s) without a score\n";
    }
    summary["agreement"] = {{"kappa", agreement.kappa.kappa},
                            {"observed", agreement.kappa.observed},
                            {"expected", agreement.kappa.expected},
                            {"degenerate", agreement.kappa.degenerate},
                            {"matched", agreement.matched},
                            {"unmatched_scores", agreement.unmatched_scores},
                            {"unmatched_labels", agreement.unmatched_labels}};
  }

  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    std::string lines;
    for (const auto& s : scores) lines += to_json(s).dump() + "\n";
    write_file(fs::path(a.out_dir) / "seg_quality_scores.jsonl", lines);
    write_file(fs::path(a.out_dir) / "seg_quality.json", summary.dump(2) + "\n");
  }
  return 0;
}

int cmd_stats(const std::string& dataset_path, std::ostream& out) {
  Dataset d = load_dataset(dataset_path);
  StatsSummary s = dataset_stats(d);
  out << "tasks: " << s.total << " (success " << s.success << ", failure " << s.failure << ", unlabeled "
      << s.unlabeled << ")\n";
  out << "label ratio: " << format_pct(s.success_pct, 1) << "% success / " << format_pct(s.failure_pct, 1)
      << "% failure\n";
  out << "length groups:";
  for (auto g : kLengthGroups) out << ' ' << group_label(g) << '=' << (s.length_histogram.count(g) ? s.length_histogram.at(g) : 0);
  if (s.length_histogram.count(LengthGroup::overflow)) out << " >80=" << s.length_histogram.at(LengthGroup::overflow);
  out << '\n';
  for (const auto& w : d.warnings) out << "warning: " << w << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory evaluation: segment, diagnose, summarize, and meta-evaluate"};
  app.name("trajeval");
  app.require_subcommand(1);

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate every task of a dataset");
  evaluate_cmd->add_option("--dataset", ev.dataset, "Line-delimited dataset file")->required();
  evaluate_cmd->add_option("--config", ev.config, "Pipeline config (JSON)");
  evaluate_cmd->add_option("--out", ev.out_dir, "Output directory")->required();
  evaluate_cmd->add_option("--variant", ev.variant, "full|naive|no_seg|no_diag|no_sum|agenttrek_baseline");
  evaluate_cmd->add_option("--parallelism", ev.parallelism, "Task and diagnosis parallelism");
  evaluate_cmd->add_option("--seed", ev.seed, "Jitter seed");
  evaluate_cmd->add_option("--mock-script", ev.mock_script, "Use a scripted mock backend");
  evaluate_cmd->add_option("--transcript", ev.transcript, "Append per-attempt audit lines to this file");
  evaluate_cmd->add_option("--max-tasks", ev.max_tasks, "Stop after this many new evaluations");
  evaluate_cmd->add_flag("--verify-images", ev.verify_images, "Fail ingestion on missing screenshots");

  MetaEvalArgs me;
  auto* meta_cmd = app.add_subcommand("meta-eval", "Score reports against gold labels");
  meta_cmd->add_option("--reports", me.reports, "reports.jsonl")->required();
  meta_cmd->add_option("--dataset", me.dataset, "Dataset with gold labels")->required();
  meta_cmd->add_option("--out", me.out, "Machine-readable metrics (default: metrics.json next to reports)");
  meta_cmd->add_flag("--exclude-errors", me.exclude_errors, "Drop reports flagged evaluator_error");
  meta_cmd->add_flag("--by-length", me.by_length, "Add the trajectory-length group table");
  meta_cmd->add_flag("--precision-only", me.precision_only, "Report precision only");

  SegQualityArgs sq;
  auto* sq_cmd = app.add_subcommand("seg-quality", "Rate segmentation quality");
  sq_cmd->add_option("--dataset", sq.dataset, "Dataset file")->required();
  sq_cmd->add_option("--config", sq.config, "Pipeline config (JSON)");
  sq_cmd->add_option("--reports", sq.reports, "Reuse segmentations from these reports");
  sq_cmd->add_option("--mock-script", sq.mock_script, "Use a scripted mock backend");
  sq_cmd->add_option("--human-labels", sq.human_labels, "Line-delimited {subtask_ref, usable} labels");
  sq_cmd->add_option("--out", sq.out_dir, "Directory for score files");

  std::string stats_dataset;
  auto* stats_cmd = app.add_subcommand("stats", "Dataset label ratio and length histogram");
  stats_cmd->add_option("--dataset", stats_dataset, "Dataset file")->required();

  std::string render_reports, render_out;
  auto* render_cmd = app.add_subcommand("render", "Render machine reports as Markdown");
  render_cmd->add_option("--reports", render_reports, "reports.jsonl")->required();
  render_cmd->add_option("--out", render_out, "Output directory")->required();

  std::string prompts_out;
  auto* prompts_cmd = app.add_subcommand("prompts", "Export the built-in prompt templates for editing");
  prompts_cmd->add_option("--out", prompts_out, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 2;
  }

  try {
    if (*evaluate_cmd) return cmd_evaluate(ev, out);
    if (*meta_cmd) return cmd_meta_eval(me, out);
    if (*sq_cmd) return cmd_seg_quality(sq, out);
    if (*stats_cmd) return cmd_stats(stats_dataset, out);
    if (*render_cmd) {
      out << "rendered " << render_all(render_reports, render_out) << " report(s)\n";
      return 0;
    }
    if (*prompts_cmd) {
      PromptSet::defaults().write_dir(prompts_out);
      out << "templates written to " << prompts_out << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace trajeval
