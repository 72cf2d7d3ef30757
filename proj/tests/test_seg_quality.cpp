#include <doctest.h>

#include "trajeval/errors.hpp"
#include "trajeval/images.hpp"
#include "trajeval/seg_quality.hpp"
#include "trajeval/segmentation.hpp"
#include "support.hpp"

using namespace trajeval;
using trajeval::testing::make_task;

namespace {

std::vector<SegQualityScore> scores_from_counts(const std::array<std::size_t, 5>& counts) {
  std::vector<SegQualityScore> v;
  for (int s = 1; s <= 5; ++s) {
    for (std::size_t i = 0; i < counts[s - 1]; ++i) {
      SegQualityScore q;
      q.task_id = "t" + std::to_string(v.size());
      q.score = s;
      q.usable = s >= kUsableThreshold;
      v.push_back(q);
    }
  }
  return v;
}

}  // namespace

TEST_CASE("score parsing and usable threshold") {
  auto five = seg_quality_from_record(extract_structured(R"({"score":5})"), "t", 1);
  CHECK(five.usable);
  auto three = seg_quality_from_record(extract_structured(R"({"score":3})"), "t", 1);
  CHECK_FALSE(three.usable);
  auto clamped = seg_quality_from_record(extract_structured(R"({"score":"7"})"), "t", 1);
  CHECK(clamped.score == 5);
  CHECK(clamped.repaired);
  CHECK_THROWS_AS(seg_quality_from_record(extract_structured(R"({"score":"great"})"), "t", 1), SchemaViolation);
  CHECK_THROWS_AS(seg_quality_from_record(extract_structured(R"({"notes":"x"})"), "t", 1), SchemaViolation);
}

TEST_CASE("usable rate for the 96.9 / 2.5 distribution") {
  // 1000 scores: 969 fives, 25 fours, 3 threes, 2 twos, 1 one.
  auto d = score_distribution(scores_from_counts({1, 2, 3, 25, 969}));
  CHECK(d.total == 1000);
  CHECK(format_pct(d.percent[4], 1) == "96.9");
  CHECK(format_pct(d.percent[3], 1) == "2.5");
  CHECK(format_pct(d.usable_pct, 1) == "99.4");
}

TEST_CASE("distribution edge cases") {
  auto ones = score_distribution(scores_from_counts({4, 0, 0, 0, 0}));
  CHECK(ones.usable_pct == 0.0);
  // 10 scores: 1,1,2,3,3,3,4,4,5,5 -> percentages 20,10,30,20,20; usable 40.
  auto ten = score_distribution(scores_from_counts({2, 1, 3, 2, 2}));
  CHECK(ten.percent == std::array<double, 5>{20, 10, 30, 20, 20});
  CHECK(ten.usable_pct == doctest::Approx(40.0));
  auto mixed = scores_from_counts({0, 0, 0, 0, 2});
  SegQualityScore err;
  err.evaluator_error = true;
  mixed.push_back(err);
  auto m = score_distribution(mixed);
  CHECK(m.total == 2);
  CHECK(m.excluded_errors == 1);
}

TEST_CASE("agreement with human labels") {
  auto scores = scores_from_counts({0, 0, 1, 1, 2});
  std::vector<HumanLabel> labels;
  for (const auto& s : scores) labels.push_back({s.ref(), s.usable});
  auto perfect = agreement_vs_human(scores, labels);
  CHECK(perfect.kappa.kappa == 1.0);
  CHECK(perfect.matched == 4);

  labels[0].usable = !labels[0].usable;
  labels.push_back({"other#1", true});
  auto partial = agreement_vs_human(scores, labels);
  // a = [F,T,T,T] model, b = [T,T,T,T] human -> p_o 3/4, p_e 3/4 * 1 -> kappa 0 (degenerate human side).
  std::vector<bool> a{false, true, true, true}, b{true, true, true, true};
  CHECK(partial.kappa.kappa == doctest::Approx(cohen_kappa(a, b).kappa));
  CHECK(partial.unmatched_labels == std::vector<std::string>{"other#1"});

  CHECK_THROWS(agreement_vs_human(scores, {{"nobody#1", true}}));
}

TEST_CASE("human label file formats") {
  auto dir = trajeval::testing::scratch_dir("labels");
  trajeval::testing::spit(dir / "l.jsonl",
                       "{\"subtask_ref\":\"a#1\",\"usable\":true}\n\n"
                       "{\"subtask_ref\":{\"task_id\":\"a\",\"subtask_index\":2},\"usable\":false}\n");
  auto labels = load_human_labels(dir / "l.jsonl");
  REQUIRE(labels.size() == 2);
  CHECK(labels[1].ref == "a#2");
  CHECK_FALSE(labels[1].usable);
}

TEST_CASE("scoring a subtask with a mock") {
  auto task = make_task("q", 6);
  auto seg = make_segmentation({0, 3, 6}, {"a", "b"});
  MockBackend m;
  m.add_response(Stage::seg_quality, {}, R"({"coherence_notes":"c","alignment_notes":"a","score":4})");
  auto s = score_subtask(task, seg, 2, m, CallOptions{}, PromptSet::defaults(), ImageLoader{});
  CHECK(s.score == 4);
  CHECK(s.usable);
  CHECK(s.ref() == "q#2");
  auto req = build_seg_quality_request(task, seg, 2, PromptSet::defaults(), ImageLoader{});
  CHECK(req.joined_text().find("Step 4: action 4") != std::string::npos);

  MockBackend bad;
  bad.add_response(Stage::seg_quality, {}, "no idea");
  auto e = score_subtask(task, seg, 1, bad, CallOptions{}, PromptSet::defaults(), ImageLoader{});
  CHECK(e.evaluator_error);
  CHECK(e.score == 0);
}

TEST_CASE("rendered table uses rubric labels") {
  auto text = render_distribution(score_distribution(scores_from_counts({0, 0, 1, 1, 2})));
  CHECK(text.find("Highly Usable") != std::string::npos);
  CHECK(text.find("75.0") != std::string::npos);
}
