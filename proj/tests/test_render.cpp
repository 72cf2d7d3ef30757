#include <doctest.h>

#include "trajeval/pipeline.hpp"
#include "trajeval/render.hpp"
#include "support.hpp"

using namespace trajeval;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("rendering shows one badge per subtask and the outcome") {
  MockBackend m;
  m.add_response(Stage::segment, {}, trajeval::testing::segment_reply({2, 4, 6}));
  m.add_response(Stage::diagnose, MockMatch{std::nullopt, std::string("Step 3: action 3")},
                 R"({"reasoning":"r","verdict":"partial","error_analysis":"slow","issues":[{"step":4,"problem":"typo","root_cause":"rushed","suggested_fix":"retype"}]})");
  m.add_response(Stage::diagnose, MockMatch{std::nullopt, std::string("Step 5: action 5")},
                 trajeval::testing::diagnosis_reply("fail"));
  m.add_response(Stage::diagnose, {}, trajeval::testing::diagnosis_reply("success"));
  m.add_response(Stage::summarize, {}, trajeval::testing::summary_reply(false));
  PipelineConfig config;
  auto r = evaluate(trajeval::testing::make_task("render", 6), config, m);
  auto md = render_report(r);
  CHECK(count(md, "[SUCCESS]") == 1);
  CHECK(count(md, "[PARTIAL]") == 1);
  CHECK(count(md, "[FAIL]") == 1);
  CHECK(md.find("TASK FAILED") != std::string::npos);
  CHECK(md.find("retype") != std::string::npos);
  CHECK(render_report(r) == md);
}

TEST_CASE("rendering file names stay distinct") {
  CHECK(rendering_filename("plain-id") == "plain-id.md");
  CHECK(rendering_filename("a/b") != rendering_filename("a_b"));
  CHECK(rendering_filename("../x").find('/') == std::string::npos);
}
