#include <doctest.h>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "trajeval/errors.hpp"
#include "trajeval/images.hpp"
#include "trajeval/pipeline.hpp"
#include "support.hpp"

using namespace trajeval;
using trajeval::testing::make_task;
using trajeval::testing::scripted_backend;
using trajeval::testing::slurp;

namespace {

PipelineConfig config_for(Variant v) {
  PipelineConfig c;
  c.variant = v;
  return c;
}

Dataset ten_task_dataset() {
  Dataset d;
  d.name = "fixture";
  for (int i = 0; i < 10; ++i) d.items.push_back(make_task("task-" + std::to_string(i), 9, i % 3 != 0));
  return d;
}

}  // namespace

TEST_CASE("call budget per variant for k = 3") {
  const std::vector<std::pair<Variant, std::size_t>> budget = {
      {Variant::naive, 1}, {Variant::agenttrek_baseline, 1}, {Variant::no_seg, 2},
      {Variant::no_sum, 4}, {Variant::full, 5},              {Variant::no_diag, 5}};
  auto task = make_task("k3", 9);
  for (auto [variant, calls] : budget) {
    CAPTURE(to_string(variant));
    auto m = scripted_backend({3, 6, 9});
    auto report = evaluate(task, config_for(variant), *m);
    CHECK(m->call_count() == calls);
    CHECK_NOTHROW(validate_report(report));
    CHECK_FALSE(report.flags.evaluator_error);
  }
}

TEST_CASE("full variant on a two-subtask task") {
  auto m = scripted_backend({4, 8});
  auto r = evaluate(make_task("two", 8), config_for(Variant::full), *m);
  REQUIRE(r.diagnoses);
  CHECK(r.diagnoses->size() == 2);
  CHECK(r.final.derived_from == DerivedFrom::model_summary);
  CHECK(r.final.success);
}

TEST_CASE("no_sum applies the hard rule without a summary call") {
  MockBackend m;
  m.add_response(Stage::segment, {}, trajeval::testing::segment_reply({3, 6}));
  m.add_response(Stage::diagnose, MockMatch{std::nullopt, std::string("Step 4: action 4")},
                 trajeval::testing::diagnosis_reply("fail"));
  m.add_response(Stage::diagnose, {}, trajeval::testing::diagnosis_reply("success"));
  auto r = evaluate(make_task("ns", 6), config_for(Variant::no_sum), m);
  CHECK_FALSE(r.final.success);
  CHECK(r.final.derived_from == DerivedFrom::hard_rule);
  CHECK(m.call_count(Stage::summarize) == 0);
  CHECK(m.call_count() == 3);
}

TEST_CASE("segmentation failure degrades to one flagged segment") {
  MockBackend m;
  m.add_response(Stage::segment, {}, "cannot");
  m.add_response(Stage::diagnose, {}, trajeval::testing::diagnosis_reply("success"));
  m.add_response(Stage::summarize, {}, trajeval::testing::summary_reply(true));
  auto r = evaluate(make_task("sf", 5), config_for(Variant::full), m);
  REQUIRE(r.segmentation);
  CHECK(r.segmentation->k() == 1);
  CHECK(r.flags.segmentation_fallback);
  CHECK(r.flags.evaluator_error);
  CHECK_NOTHROW(validate_report(r));
}

TEST_CASE("baseline exhaustion yields an evaluator error report") {
  MockBackend m;
  m.add_response(Stage::baseline, {}, "???");
  auto r = evaluate(make_task("b", 3), config_for(Variant::naive), m);
  CHECK(r.flags.evaluator_error);
  CHECK_FALSE(r.final.success);
  CHECK(m.call_count() == 10);
}

TEST_CASE("agenttrek request carries only the final screenshot") {
  auto dir = trajeval::testing::scratch_dir("agenttrek");
  cv::imwrite((dir / "f.png").string(), cv::Mat(4, 4, CV_8UC3, cv::Scalar(0, 0, 255)));
  auto task = make_task("a", 3);
  for (auto& s : task.trajectory.steps) s.screenshot_ref = (dir / "f.png").string();
  auto req = build_agenttrek_request(task, PromptSet::defaults(), ImageLoader{});
  CHECK(req.image_count() == 1);
  auto naive = build_naive_request(task, PromptSet::defaults(), ImageLoader{}, false);
  CHECK(naive.image_count() == 3);
  CHECK(build_naive_request(task, PromptSet::defaults(), ImageLoader{}, true).image_count() == 0);

  auto m = scripted_backend({3});
  auto r = evaluate(task, config_for(Variant::agenttrek_baseline), *m);
  CHECK(r.final.success);
  CHECK(r.final.derived_from == DerivedFrom::baseline);
  CHECK_FALSE(r.flags.text_only);
}

TEST_CASE("no screenshots means a text-only report") {
  auto m = scripted_backend({3});
  auto task = make_task("t", 3);
  std::size_t missing = 0;
  CHECK(build_agenttrek_request(task, PromptSet::defaults(), ImageLoader{}, &missing).image_count() == 0);
  auto r = evaluate(task, config_for(Variant::agenttrek_baseline), *m);
  CHECK(r.flags.text_only);
}

TEST_CASE("reports round-trip through json") {
  for (auto v : {Variant::full, Variant::no_diag, Variant::no_seg, Variant::naive}) {
    auto m = scripted_backend({3, 6, 9}, false);
    auto r = evaluate(make_task("rt", 9), config_for(v), *m);
    auto j = to_json(r);
    CHECK(to_json(report_from_json(j)) == j);
  }
}

TEST_CASE("two runs with the same seed are byte-identical") {
  auto d = ten_task_dataset();
  auto config = config_for(Variant::full);
  config.seed = 17;
  config.task_parallelism = 4;
  config.diagnosis_parallelism = 3;
  auto run = [&](const std::string& name) {
    auto dir = trajeval::testing::scratch_dir(name);
    auto m = scripted_backend({3, 6, 9});
    m->add_fault(Stage::diagnose, {}, 2);  // exercise jittered retries too
    VirtualClock clock;
    evaluate_dataset(d, config, *m, dir, RetryEnv{&clock, nullptr, config.seed});
    return std::make_pair(slurp(dir / kReportsFile), slurp(dir / kManifestFile));
  };
  auto a = run("det_a");
  auto b = run("det_b");
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(std::count(a.first.begin(), a.first.end(), '\n') == 10);
}

TEST_CASE("resume evaluates only the missing tasks") {
  Dataset d;
  d.name = "two";
  d.items = {make_task("one", 3), make_task("two", 3)};
  auto config = config_for(Variant::naive);
  auto dir = trajeval::testing::scratch_dir("resume");
  auto m = scripted_backend({3});
  RunOptions stop;
  stop.max_tasks = 1;
  auto first = evaluate_dataset(d, config, *m, dir, {}, stop);
  CHECK(first.evaluated == 1);
  m->clear_calls();
  auto second = evaluate_dataset(d, config, *m, dir);
  CHECK(second.evaluated == 1);
  CHECK(second.skipped_resumed == 1);
  CHECK(second.completed == 2);
  CHECK(m->call_count() == 1);
  CHECK(load_reports((dir / kReportsFile).string()).size() == 2);

  // A torn trailing line is dropped and that task is redone.
  std::string text = slurp(dir / kReportsFile);
  trajeval::testing::spit(dir / kReportsFile, text.substr(0, text.size() - 10));
  m->clear_calls();
  auto third = evaluate_dataset(d, config, *m, dir);
  CHECK(third.evaluated == 1);
  CHECK(load_reports((dir / kReportsFile).string()).size() == 2);

  auto other = config_for(Variant::full);
  CHECK_THROWS_AS(evaluate_dataset(d, other, *m, dir), ConfigError);
}

TEST_CASE("ad-hoc serial and parallel runs agree") {
  auto d = ten_task_dataset();
  auto serial = config_for(Variant::no_diag);
  auto parallel = serial;
  parallel.task_parallelism = 8;
  auto m = scripted_backend({3, 6, 9});
  auto dir1 = trajeval::testing::scratch_dir("serial");
  auto dir2 = trajeval::testing::scratch_dir("parallel");
  evaluate_dataset(d, serial, *m, dir1);
  evaluate_dataset(d, parallel, *m, dir2);
  CHECK(slurp(dir1 / kReportsFile) == slurp(dir2 / kReportsFile));
  CHECK(serial.fingerprint() == parallel.fingerprint());
}

TEST_CASE("empty dataset is rejected") {
  Dataset d;
  auto m = scripted_backend({1});
  CHECK_THROWS_AS(evaluate_dataset(d, config_for(Variant::full), *m, trajeval::testing::scratch_dir("empty")),
                  DatasetError);
}

TEST_CASE("config parsing") {
  auto c = config_from_json(nlohmann::json::parse(R"({
    "variant": "no_sum", "seed": 3, "retry": {"max_attempts": 4, "base_delay_ms": 10},
    "temperatures": {"diagnose": 0.0}, "parallelism": {"tasks": 2}
  })"));
  CHECK(c.variant == Variant::no_sum);
  CHECK(c.retry.max_attempts == 4);
  CHECK(c.temperatures.at(Stage::diagnose) == 0.0);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"variantt": "full"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"variant": "bogus"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"retry": {"max_attempts": 0}})")), ConfigError);
  CHECK(config_for(Variant::full).fingerprint() != config_for(Variant::naive).fingerprint());
}

TEST_CASE("temperature override reaches the request") {
  MockBackend m;
  std::optional<double> seen;
  m.add_handler(Stage::baseline, [&](const ChatRequest& r) -> std::optional<std::string> {
    seen = r.temperature;
    return trajeval::testing::summary_reply(true);
  });
  auto config = config_for(Variant::naive);
  evaluate(make_task("t", 2), config, m);
  CHECK_FALSE(seen.has_value());
  config.temperatures[Stage::baseline] = 0.0;
  evaluate(make_task("t", 2), config, m);
  CHECK(seen == 0.0);
}
