#include <doctest.h>

#include <random>

#include "trajeval/mock_backend.hpp"
#include "trajeval/segmentation.hpp"
#include "support.hpp"

using namespace trajeval;
using trajeval::testing::make_task;

namespace {

void check_partition(const Segmentation& s, std::size_t n) {
  REQUIRE(s.boundaries.size() >= 2);
  CHECK(s.boundaries.front() == 0);
  CHECK(s.boundaries.back() == n);
  std::size_t total = 0;
  for (std::size_t i = 1; i < s.boundaries.size(); ++i) {
    REQUIRE(s.boundaries[i - 1] < s.boundaries[i]);
    total += s.boundaries[i] - s.boundaries[i - 1];
  }
  CHECK(total == n);
  REQUIRE(s.subtasks.size() + 1 == s.boundaries.size());
  std::size_t next = 1;
  for (const auto& t : s.subtasks) {
    CHECK(t.start_step == next);
    next = t.end_step + 1;
  }
  CHECK(next == n + 1);
}

}  // namespace

TEST_CASE("sort and dedupe") {
  auto s = normalize_boundaries({4, 0, 14, 4}, 14, {"a", "b"}, "task");
  CHECK(s.boundaries == std::vector<std::size_t>{0, 4, 14});
  CHECK(s.repaired());
}

TEST_CASE("empty proposal falls back to one segment") {
  auto s = normalize_boundaries({}, 7, {}, "the whole task");
  CHECK(s.boundaries == std::vector<std::size_t>{0, 7});
  REQUIRE(s.k() == 1);
  CHECK(s.subtasks[0].description == "the whole task");
  CHECK(s.repaired());
}

TEST_CASE("out of range values dropped and n forced") {
  auto s = normalize_boundaries({0, 3, 99}, 10, {"a", "b"}, "task");
  CHECK(s.boundaries == std::vector<std::size_t>{0, 3, 10});
  CHECK(s.repaired());
}

TEST_CASE("clean proposal is accepted as is") {
  auto s = normalize_boundaries({0, 4, 9, 14}, 14, {"a", "b", "c"}, "task");
  CHECK_FALSE(s.repaired());
  REQUIRE(s.k() == 3);
  CHECK(s.subtasks[0].start_step == 1);
  CHECK(s.subtasks[0].end_step == 4);
  CHECK(s.subtasks[1].start_step == 5);
  CHECK(s.subtasks[1].end_step == 9);
  CHECK(s.subtasks[2].start_step == 10);
  CHECK(s.subtasks[2].end_step == 14);
}

TEST_CASE("description padding and truncation") {
  auto pad = normalize_boundaries({0, 2, 5}, 5, {"only"}, "task");
  CHECK(pad.subtasks[1].description == "Unnamed subtask (steps 3–5)");
  CHECK(pad.repaired());
  auto cut = normalize_boundaries({0, 5}, 5, {"a", "b"}, "task");
  CHECK(cut.k() == 1);
  CHECK(cut.subtasks[0].description == "a");
  CHECK(cut.repaired());
}

TEST_CASE("single-step trajectory always collapses to one segment") {
  for (const auto& raw : std::vector<std::vector<long long>>{{}, {0, 1}, {1, 1, 0}, {-3, 5}, {0}}) {
    auto s = normalize_boundaries(raw, 1, {"x", "y"}, "task");
    CHECK(s.boundaries == std::vector<std::size_t>{0, 1});
  }
}

TEST_CASE("partition law over random proposals") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 90)(rng);
    const std::size_t count = std::uniform_int_distribution<std::size_t>(0, 12)(rng);
    std::vector<long long> raw;
    std::uniform_int_distribution<long long> value(-5, static_cast<long long>(n) + 5);
    for (std::size_t i = 0; i < count; ++i) raw.push_back(value(rng));
    std::vector<std::string> desc(std::uniform_int_distribution<std::size_t>(0, 6)(rng), "d");
    auto s = normalize_boundaries(raw, n, desc, "task");
    check_partition(s, n);
  }
}

TEST_CASE("max segment split") {
  auto one = make_segmentation({0, 45}, {"long"});
  auto split = enforce_max_segment(one, 30);
  CHECK(split.boundaries == std::vector<std::size_t>{0, 23, 45});
  CHECK(split.subtasks[0].description == "long (part 1)");
  CHECK(split.subtasks[1].description == "long (part 2)");

  auto ok = make_segmentation({0, 30, 40}, {"a", "b"});
  CHECK(enforce_max_segment(ok, 30) == ok);
}

TEST_CASE("enforce_max_segment is idempotent and bounded") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 200)(rng);
    const std::size_t cap = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
    std::vector<long long> raw;
    for (int i = 0; i < 4; ++i) raw.push_back(std::uniform_int_distribution<long long>(0, n)(rng));
    auto s = normalize_boundaries(raw, n, {}, "t");
    auto once = enforce_max_segment(s, cap);
    check_partition(once, n);
    CHECK(once.max_segment_length() <= std::max(cap, std::size_t{1}));
    CHECK(once.max_segment_length() <= s.max_segment_length());
    CHECK(enforce_max_segment(once, cap) == once);
  }
}

TEST_CASE("sixty steps in six segments gives ten-step contexts") {
  auto s = make_segmentation({0, 10, 20, 30, 40, 50, 60}, {"a", "b", "c", "d", "e", "f"});
  CHECK(s.max_segment_length() == 10);
  CHECK(60 / s.max_segment_length() == 6);
}

TEST_CASE("record parsing from step ranges") {
  auto rec = extract_structured(trajeval::testing::segment_reply({4, 9, 14}));
  auto s = segmentation_from_record(rec, 14, "task");
  CHECK(s.boundaries == std::vector<std::size_t>{0, 4, 9, 14});
  CHECK_FALSE(s.repaired());

  auto sloppy = extract_structured(R"({"subtasks":[{"description":"b","end_step":"14"},{"description":"a","end_step":3}]})");
  auto t = segmentation_from_record(sloppy, 14, "task");
  CHECK(t.boundaries == std::vector<std::size_t>{0, 3, 14});
  CHECK(t.subtasks[0].description == "a");

  CHECK_THROWS_AS(segmentation_from_record(extract_structured(R"({"steps": []})"), 5, "t"), SchemaViolation);
}

TEST_CASE("segmentation request is text only") {
  auto task = make_task("s", 6);
  task.trajectory.steps[0].screenshot_ref = "/tmp/x.png";
  task.trajectory.initial_screenshot_ref = "/tmp/y.png";
  auto req = build_segmentation_request(task, PromptSet::defaults());
  CHECK(req.image_count() == 0);
  CHECK(req.joined_text().find("Step 6: action 6") != std::string::npos);
}

TEST_CASE("segment_trajectory end to end with a mock") {
  auto m = trajeval::testing::scripted_backend({20, 60});
  auto task = make_task("s", 60);
  auto out = segment_trajectory(task, *m, CallOptions{}, PromptSet::defaults(), 30);
  check_partition(out.segmentation, 60);
  CHECK(out.segmentation.max_segment_length() <= 30);
  CHECK(out.stats.attempts == 1);
}

TEST_CASE("json round trip") {
  auto s = normalize_boundaries({0, 3, 99}, 10, {"a"}, "task");
  auto back = segmentation_from_json(to_json(s));
  CHECK(back == s);
  CHECK(back.repair_notes == s.repair_notes);
}
