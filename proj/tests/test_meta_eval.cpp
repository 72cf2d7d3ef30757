#include <doctest.h>

#include "trajeval/errors.hpp"
#include "trajeval/meta_eval.hpp"
#include "support.hpp"

using namespace trajeval;
using trajeval::testing::make_task;

namespace {

EvaluationReport report(const std::string& id, std::size_t n, bool predicted, bool error = false) {
  EvaluationReport r;
  r.task_id = id;
  r.variant = Variant::naive;
  r.trajectory_length = n;
  r.final.success = predicted;
  r.final.justification = "j";
  r.final.derived_from = DerivedFrom::naive_call;
  r.flags.evaluator_error = error;
  return r;
}

}  // namespace

TEST_CASE("single group, all correct") {
  Dataset d;
  std::vector<EvaluationReport> rs;
  for (int i = 0; i < 4; ++i) {
    d.items.push_back(make_task("t" + std::to_string(i), 5, i % 2 == 0));
    rs.push_back(report("t" + std::to_string(i), 5, i % 2 == 0));
  }
  auto t = metrics_by_group(rs, d);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].first == LengthGroup::lt10);
  CHECK(t.rows[0].second.accuracy == 100.0);
  CHECK(t.overall.f1 == 100.0);
}

TEST_CASE("per-group matrices match hand counts") {
  Dataset d;
  std::vector<EvaluationReport> rs;
  auto add = [&](std::size_t n, bool pred, bool gold) {
    const std::string id = "t" + std::to_string(rs.size());
    d.items.push_back(make_task(id, n, gold));
    rs.push_back(report(id, n, pred));
  };
  // lt10: tp 2, fp 1, fn 0, tn 1. g20_30: tp 1, fp 0, fn 1, tn 2. overflow: tp 1.
  add(3, true, true), add(4, true, true), add(5, true, false), add(6, false, false);
  add(25, true, true), add(25, false, true), add(25, false, false), add(25, false, false);
  add(90, true, true);
  auto t = metrics_by_group(rs, d);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].second.matrix == ConfusionMatrix{2, 1, 0, 1});
  CHECK(t.rows[1].first == LengthGroup::g20_30);
  CHECK(t.rows[1].second.matrix == ConfusionMatrix{1, 0, 1, 2});
  CHECK(t.rows[2].first == LengthGroup::overflow);
  CHECK(t.overall.matrix == ConfusionMatrix{4, 1, 1, 3});
  CHECK(t.overall.precision == doctest::Approx(80.0));
  CHECK(t.overall.recall == doctest::Approx(80.0));
  auto text = render_metrics_table(t, true);
  CHECK(text.find("20-30") != std::string::npos);
  auto p_only = render_metrics_table(t, false, true);
  CHECK(p_only.find("Recall") == std::string::npos);
}

TEST_CASE("exclusions are counted") {
  Dataset d;
  d.items = {make_task("a", 5, true), make_task("b", 5, std::nullopt), make_task("c", 5, false)};
  std::vector<EvaluationReport> rs = {report("a", 5, true), report("b", 5, true), report("c", 5, false, true)};
  auto kept = metrics_by_group(rs, d);
  CHECK(kept.missing_gold == 1);
  CHECK(kept.scored == 2);
  auto dropped = metrics_by_group(rs, d, MetaEvalOptions{true});
  CHECK(dropped.excluded_errors == 1);
  CHECK(dropped.scored == 1);
  CHECK(render_metrics_table(kept, false).find("no gold label") != std::string::npos);

  rs.push_back(report("ghost", 5, true));
  CHECK_THROWS_AS(metrics_by_group(rs, d), DatasetError);
}
