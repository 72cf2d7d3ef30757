#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "trajeval/metrics.hpp"

using namespace trajeval;

namespace {

// Independent kappa: contingency table and marginals built from scratch.
double direct_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<std::string, std::string>, double> cell;
  std::set<std::string> labels;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cell[{a[i], b[i]}] += 1;
    labels.insert(a[i]);
    labels.insert(b[i]);
  }
  const double n = static_cast<double>(a.size());
  double po = 0, pe = 0;
  for (const auto& l : labels) {
    po += cell[{l, l}] / n;
    double row = 0, col = 0;
    for (const auto& m : labels) {
      row += cell[{l, m}];
      col += cell[{m, l}];
    }
    pe += (row / n) * (col / n);
  }
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1 - pe);
}

std::vector<PredictionPair> from_matrix(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  std::vector<PredictionPair> v;
  v.insert(v.end(), tp, {true, true});
  v.insert(v.end(), fp, {true, false});
  v.insert(v.end(), fn, {false, true});
  v.insert(v.end(), tn, {false, false});
  return v;
}

}  // namespace

TEST_CASE("F1 cross-checks from published precision and recall") {
  CHECK(std::abs(f1_from(95.00, 93.62) - 94.31) <= 0.01);
  CHECK(std::abs(f1_from(51.42, 100.00) - 67.91) <= 0.01);
  CHECK(std::abs(f1_from(77.93, 80.87) - 79.37) <= 0.02);
  CHECK(std::abs(f1_from(84.04, 91.59) - 87.66) <= 0.02);
}

TEST_CASE("all correct gives 100 everywhere") {
  auto m = compute_metrics(from_matrix(7, 0, 0, 5));
  CHECK(m.accuracy == 100.0);
  CHECK(m.precision == 100.0);
  CHECK(m.recall == 100.0);
  CHECK(m.f1 == 100.0);
}

TEST_CASE("hand-computed confusion matrix") {
  // tp 6, fp 2, fn 3, tn 9: acc 15/20, p 6/8, r 6/9, f1 12/17.
  auto m = compute_metrics(from_matrix(6, 2, 3, 9));
  CHECK(m.matrix == ConfusionMatrix{6, 2, 3, 9});
  CHECK(m.accuracy == doctest::Approx(75.0));
  CHECK(m.precision == doctest::Approx(75.0));
  CHECK(m.recall == doctest::Approx(600.0 / 9));
  CHECK(m.f1 == doctest::Approx(1200.0 / 17));
}

TEST_CASE("zero denominators warn instead of dividing") {
  auto m = compute_metrics(from_matrix(0, 0, 0, 4));
  CHECK(m.precision == 0);
  CHECK(m.recall == 0);
  CHECK(m.f1 == 0);
  CHECK_FALSE(m.warnings.empty());
  CHECK_THROWS(compute_metrics({}));
}

TEST_CASE("length group edges") {
  const std::vector<std::pair<std::size_t, LengthGroup>> expect = {
      {1, LengthGroup::lt10},    {5, LengthGroup::lt10},    {9, LengthGroup::lt10},    {10, LengthGroup::g10_20},
      {19, LengthGroup::g10_20}, {20, LengthGroup::g20_30}, {29, LengthGroup::g20_30}, {30, LengthGroup::g30_40},
      {39, LengthGroup::g30_40}, {40, LengthGroup::g40_50}, {49, LengthGroup::g40_50}, {50, LengthGroup::g50_80},
      {80, LengthGroup::g50_80}, {81, LengthGroup::overflow}};
  for (auto [n, g] : expect) {
    CAPTURE(n);
    CHECK(group_of_length(n) == g);
  }
  CHECK_THROWS(group_of_length(0));
  for (auto g : kLengthGroups) CHECK(length_group_from_string(to_string(g)) == g);
}

TEST_CASE("kappa worked cases") {
  auto k0 = cohen_kappa(std::vector<bool>{true, true, false, false}, std::vector<bool>{true, false, true, false});
  CHECK(k0.observed == doctest::Approx(0.5));
  CHECK(k0.expected == doctest::Approx(0.5));
  CHECK(k0.kappa == doctest::Approx(0.0));
  auto k1 = cohen_kappa(std::vector<std::string>{"a", "b", "a"}, std::vector<std::string>{"a", "b", "a"});
  CHECK(k1.kappa == 1.0);
  auto same = cohen_kappa(std::vector<bool>{true, true}, std::vector<bool>{true, true});
  CHECK(same.degenerate);
  CHECK(same.kappa == 1.0);
  CHECK_THROWS(cohen_kappa(std::vector<bool>{true}, std::vector<bool>{}));
}

TEST_CASE("kappa against a direct formula on random fixtures") {
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 300)(rng);
    const int labels = std::uniform_int_distribution<int>(2, 5)(rng);
    const double agree = std::uniform_real_distribution<double>(0, 1)(rng);
    std::uniform_int_distribution<int> lab(0, labels - 1);
    std::bernoulli_distribution copy(agree);
    std::vector<std::string> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back("L" + std::to_string(lab(rng)));
      b.push_back(copy(rng) ? a.back() : "L" + std::to_string(lab(rng)));
    }
    auto got = cohen_kappa(a, b);
    CHECK(std::abs(got.kappa - direct_kappa(a, b)) <= 1e-9);
    CHECK(std::abs(got.kappa - cohen_kappa(b, a).kappa) <= 1e-12);
  }
}

TEST_CASE("constructed 200-item fixture near 0.89") {
  // 100 both usable, 89 both problematic, 6 usable/problematic, 5 problematic/usable.
  std::vector<bool> a, b;
  auto add = [&](int count, bool x, bool y) {
    for (int i = 0; i < count; ++i) {
      a.push_back(x);
      b.push_back(y);
    }
  };
  add(100, true, true);
  add(89, false, false);
  add(6, true, false);
  add(5, false, true);
  // Exact: p_o = 189/200; p_e = (106*105 + 94*95)/200^2; kappa = (189*200 - 20060)/(40000 - 20060).
  const long long n = 200, po_num = 189, pe_num = 106 * 105 + 94 * 95;
  const double exact = static_cast<double>(po_num * n - pe_num) / static_cast<double>(n * n - pe_num);
  CHECK(exact == doctest::Approx(887.0 / 997.0).epsilon(1e-15));
  auto k = cohen_kappa(a, b);
  CHECK(std::abs(k.kappa - exact) <= 1e-12);
  CHECK(format_pct(k.kappa, 2) == "0.89");
}

TEST_CASE("percent formatting") {
  CHECK(format_pct(99.4, 1) == "99.4");
  CHECK(format_pct(2.0 / 3.0 * 100) == "66.67");
}
