#include <doctest.h>

#include <random>

#include "trajeval/errors.hpp"
#include "trajeval/extract.hpp"

using namespace trajeval;

namespace {

enum class Expect { record, no_structure, parse_failed };

struct Case {
  const char* name;
  std::string text;
  Expect expect;
  const char* key = nullptr;  // checked key when a record is expected
  nlohmann::json value = nullptr;
};

Expect classify(const std::string& text, Record* out) {
  try {
    *out = extract_structured(text);
    return Expect::record;
  } catch (const NoStructureFound&) {
    return Expect::no_structure;
  } catch (const ParseFailed&) {
    return Expect::parse_failed;
  }
}

}  // namespace

TEST_CASE("extraction corpus") {
  const std::vector<Case> corpus = {
      {"bare record", R"({"verdict":"success"})", Expect::record, "verdict", "success"},
      {"fenced with tag", "```json\n{\"verdict\":\"success\"}\n```", Expect::record, "verdict", "success"},
      {"fenced without tag", "```\n{\"a\": 2}\n```", Expect::record, "a", 2},
      {"prose wrapped", "Here you go:\n{\"a\": 3}\nHope that helps.", Expect::record, "a", 3},
      {"trailing comma in prose", "Sure! Here is the result: {\"a\": 1,} thanks", Expect::record, "a", 1},
      {"trailing comma in list", R"({"xs": [1, 2, 3,],})", Expect::record, "xs", nlohmann::json::array({1, 2, 3})},
      {"smart quotes", "{“verdict”: “fail”}", Expect::record, "verdict", "fail"},
      {"nested braces in strings", R"({"note": "use {curly} and } braces", "n": 1})", Expect::record, "note",
       "use {curly} and } braces"},
      {"escaped quote in string", R"(x {"q": "say \"hi\" {", "n": 2} y)", Expect::record, "n", 2},
      {"nested record", R"({"outer": {"inner": {"v": 5}}})", Expect::record, "outer",
       nlohmann::json{{"inner", {{"v", 5}}}}},
      {"leading whitespace", "  \n\t{\"a\": true}  ", Expect::record, "a", true},
      {"skips a bad candidate", "set {x} then {\"a\": 4}", Expect::record, "a", 4},
      {"refusal", "I cannot evaluate this.", Expect::no_structure},
      {"empty", "", Expect::no_structure},
      {"only whitespace", "   \n ", Expect::no_structure},
      {"top-level array", "[1, 2, 3]", Expect::no_structure},
      {"unbalanced", "{\"a\": 1", Expect::parse_failed},
      {"garbage inside braces", "{ this is not json }", Expect::parse_failed},
  };
  REQUIRE(corpus.size() >= 12);
  for (const auto& c : corpus) {
    CAPTURE(c.name);
    Record r;
    const Expect got = classify(c.text, &r);
    CHECK(got == c.expect);
    if (got == Expect::record && c.key) CHECK(r.at(c.key) == c.value);
  }
}

TEST_CASE("error classes are validation errors") {
  CHECK_THROWS_AS(extract_structured("nothing"), ValidationError);
  CHECK_THROWS_AS(extract_structured("{oops"), ValidationError);
}

TEST_CASE("trailing comma repair leaves strings alone") {
  CHECK(strip_trailing_commas(R"({"a": "x,}", "b": [1,],})") == R"({"a": "x,}", "b": [1]})");
}

TEST_CASE("fuzz: random strings end in a record or a typed error") {
  std::mt19937_64 rng(20240601);
  const std::string alphabet = "{}[]\",:\\ abc123\n`'truefalsn-.e";
  std::uniform_int_distribution<std::size_t> len(0, 200), pick(0, alphabet.size() - 1), byte(0, 255);
  std::size_t records = 0, typed = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    const std::size_t n = len(rng);
    for (std::size_t j = 0; j < n; ++j) {
      s += (i % 10 == 0) ? static_cast<char>(byte(rng)) : alphabet[pick(rng)];
    }
    try {
      Record r = extract_structured(s);
      REQUIRE(r.is_object());
      ++records;
    } catch (const ValidationError&) {
      ++typed;
    }
  }
  CHECK(records + typed == 10000);
}
