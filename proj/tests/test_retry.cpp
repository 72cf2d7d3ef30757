#include <doctest.h>

#include <filesystem>

#include "trajeval/errors.hpp"
#include "trajeval/extract.hpp"
#include "trajeval/mock_backend.hpp"
#include "trajeval/retry.hpp"
#include "trajeval/transcript.hpp"
#include "support.hpp"

using namespace trajeval;
using namespace std::chrono_literals;

namespace {

ChatRequest text_request(const std::string& s) {
  ChatRequest r;
  r.stage = Stage::summarize;
  r.system_text = "sys";
  r.user_parts.push_back(TextPart{s});
  return r;
}

Record accept(const ChatResponse& r) { return extract_structured(r.text); }

}  // namespace

TEST_CASE("pre-jitter schedule") {
  RetryPolicy p;
  CHECK(p.pre_jitter_delay(1) == 0ms);
  CHECK(p.pre_jitter_delay(2) == 1000ms);
  CHECK(p.pre_jitter_delay(3) == 2000ms);
  CHECK(p.pre_jitter_delay(4) == 4000ms);
  CHECK(p.pre_jitter_delay(8) == 60000ms);  // 64 s capped
  p.max_attempts = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("jitter stays within the band") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    auto d = apply_jitter(1000ms, 0.2, rng);
    CHECK(d >= 800ms);
    CHECK(d <= 1200ms);
  }
  CHECK(apply_jitter(1000ms, 0.0, rng) == 1000ms);
}

TEST_CASE("three transport faults then success on attempt four") {
  MockBackend m;
  m.add_response(Stage::summarize, {}, R"({"ok":true})");
  m.add_fault(Stage::summarize, {}, 3);
  VirtualClock clock;
  AttemptStats st;
  Record r = complete_with_retry(m, text_request("x"), RetryPolicy{}, accept, RetryEnv{&clock, nullptr, 1}, &st);
  CHECK(r["ok"] == true);
  CHECK(st.attempts == 4);
  CHECK(st.pre_jitter_delays == std::vector<Millis>{1000ms, 2000ms, 4000ms});
  CHECK(clock.sleeps() == st.delays);
  CHECK(m.call_count() == 4);
}

TEST_CASE("garbage responses also consume attempts") {
  MockBackend m;
  m.add_response(Stage::summarize, {}, R"({"ok":true})");
  m.add_fault(Stage::summarize, {}, 2, FaultMode::garbage);
  VirtualClock clock;
  AttemptStats st;
  complete_with_retry(m, text_request("x"), RetryPolicy{}, accept, RetryEnv{&clock, nullptr, 1}, &st);
  CHECK(st.attempts == 3);
}

TEST_CASE("persistent failure exhausts ten attempts") {
  MockBackend m;
  m.add_response(Stage::summarize, {}, "no structure here");
  VirtualClock clock;
  try {
    complete_with_retry(m, text_request("x"), RetryPolicy{}, accept, RetryEnv{&clock, nullptr, 1});
    FAIL("expected RetriesExhausted");
  } catch (const RetriesExhausted& e) {
    CHECK(e.attempts() == 10);
  }
  CHECK(m.call_count() == 10);
  CHECK(clock.sleeps().size() == 9);
}

TEST_CASE("first-try success sleeps zero times") {
  MockBackend m;
  m.add_response(Stage::summarize, {}, R"({"ok":1})");
  VirtualClock clock;
  complete_with_retry(m, text_request("x"), RetryPolicy{}, accept, RetryEnv{&clock, nullptr, 1});
  CHECK(clock.sleeps().empty());
}

TEST_CASE("jitter is reproducible for a fixed seed") {
  auto run = [](std::uint64_t seed) {
    MockBackend m;
    m.add_response(Stage::summarize, {}, R"({"ok":1})");
    m.add_fault(Stage::summarize, {}, 4);
    AttemptStats st;
    complete_with_retry(m, text_request("x"), RetryPolicy{}, accept, RetryEnv{nullptr, nullptr, seed}, &st);
    return st.delays;
  };
  CHECK(run(11) == run(11));
  CHECK(run(11) != run(12));
}

TEST_CASE("transcript lines per attempt") {
  auto dir = trajeval::testing::scratch_dir("transcript");
  {
    TranscriptSink sink(dir / "one.jsonl");
    MockBackend m;
    m.add_response(Stage::summarize, {}, R"({"ok":1})");
    complete_with_retry(m, text_request("x"), RetryPolicy{}, accept, RetryEnv{nullptr, &sink, 0});
    CHECK(sink.lines_written() == 1);
  }
  {
    TranscriptSink sink(dir / "four.jsonl");
    MockBackend m;
    m.add_response(Stage::summarize, {}, R"({"ok":1})");
    m.add_fault(Stage::summarize, {}, 3);
    complete_with_retry(m, text_request("x"), RetryPolicy{}, accept, RetryEnv{nullptr, &sink, 0});
    CHECK(sink.lines_written() == 4);
  }
  std::string text = trajeval::testing::slurp(dir / "four.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  TranscriptSink disabled;
  MockBackend m;
  m.add_response(Stage::summarize, {}, R"({"ok":1})");
  CHECK_NOTHROW(complete_with_retry(m, text_request("x"), RetryPolicy{}, accept, RetryEnv{nullptr, &disabled, 0}));
  CHECK(disabled.lines_written() == 0);
}

TEST_CASE("fingerprint ignores stage but not content") {
  ChatRequest a = text_request("hello");
  ChatRequest b = a;
  b.stage = Stage::diagnose;
  CHECK(fingerprint(a) == fingerprint(b));
  CHECK(fingerprint(a) != fingerprint(text_request("hello!")));
}

TEST_CASE("mock script resolution and faults from json") {
  auto m = MockBackend::from_json(nlohmann::json::parse(R"({
    "responses": [
      {"stage": "summarize", "contains": "special", "text": {"which": "contains"}},
      {"stage": "summarize", "text": "{\"which\": \"wildcard\"}"}
    ],
    "faults": [{"stage": "summarize", "contains": "flaky", "fail_first": 1}]
  })"));
  CHECK(extract_structured(m->complete(text_request("a special one")).text)["which"] == "contains");
  CHECK(extract_structured(m->complete(text_request("plain")).text)["which"] == "wildcard");
  CHECK_THROWS_AS(m->complete(text_request("flaky")), TransportError);
  CHECK_NOTHROW(m->complete(text_request("flaky")));
  ChatRequest other = text_request("x");
  other.stage = Stage::segment;
  CHECK_THROWS_AS(m->complete(other), TransportError);
}
