#pragma once

// Retry with exponential backoff around a backend call and a response validator.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <mutex>
#include <random>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "trajeval/chat.hpp"
#include "trajeval/errors.hpp"
#include "trajeval/hashing.hpp"
#include "trajeval/transcript.hpp"

namespace trajeval {

using Millis = std::chrono::milliseconds;

struct RetryPolicy {
  int max_attempts = 10;
  Millis base_delay{1000};
  double factor = 2.0;
  Millis max_delay{60000};
  double jitter_fraction = 0.2;

  /// Throws ConfigError on violated invariants.
  void validate() const;
  /// Delay before attempt `attempt` (1-based) without jitter: 0 for the first attempt, then
  /// min(max_delay, base_delay * factor^(attempt - 2)).
  Millis pre_jitter_delay(int attempt) const;
};

class Sleeper {
 public:
  virtual ~Sleeper() = default;
  virtual void sleep(Millis d) = 0;
};

class RealSleeper final : public Sleeper {
 public:
  void sleep(Millis d) override;
};

/// Records requested sleeps and advances a virtual time instead of blocking.
class VirtualClock final : public Sleeper {
 public:
  void sleep(Millis d) override;
  Millis now() const;
  std::vector<Millis> sleeps() const;

 private:
  mutable std::mutex mu_;
  Millis now_{0};
  std::vector<Millis> sleeps_;
};

/// Execution environment shared by every call in a run.
struct RetryEnv {
  Sleeper* sleeper = nullptr;        // null: do not sleep
  TranscriptSink* transcript = nullptr;
  std::uint64_t seed = 0;            // jitter seed, combined with the request fingerprint
};

/// Everything a stage needs to issue model calls.
struct CallOptions {
  RetryPolicy policy;
  RetryEnv env;
  std::map<Stage, double> temperatures;  // absent: provider default
  std::optional<int> max_output;

  /// Sets temperature and output budget on a request of the given stage.
  void apply(ChatRequest& req) const;
};

struct AttemptStats {
  int attempts = 0;
  std::vector<Millis> pre_jitter_delays;
  std::vector<Millis> delays;
  std::vector<std::string> failures;
  Millis latency{0};
  Usage usage;

  /// Latency plus backoff time.
  Millis elapsed() const;
  void merge(const AttemptStats& other);
};

/// Draws the jittered delay: `base` scaled by a factor uniform in [1 - j, 1 + j].
Millis apply_jitter(Millis base, double jitter_fraction, std::mt19937_64& rng);

/// Calls `backend.complete(req)` until `validator(response)` returns without throwing.
/// TransportError and ValidationError each consume one attempt; any other exception propagates.
/// Throws RetriesExhausted after `policy.max_attempts` failures.
template <typename Validator>
auto complete_with_retry(Backend& backend, const ChatRequest& req, const RetryPolicy& policy,
                         Validator&& validator, const RetryEnv& env, AttemptStats* stats = nullptr)
    -> std::invoke_result_t<Validator&, const ChatResponse&> {
  req.validate();
  const std::string fp = fingerprint(req);
  std::mt19937_64 rng(env.seed ^ sha256_u64(fp));
  AttemptStats local;
  AttemptStats& st = stats ? *stats : local;
  std::string last_text;
  std::vector<std::string> reasons;

  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    if (attempt > 1) {
      const Millis base = policy.pre_jitter_delay(attempt);
      const Millis d = apply_jitter(base, policy.jitter_fraction, rng);
      st.pre_jitter_delays.push_back(base);
      st.delays.push_back(d);
      if (env.sleeper) env.sleeper->sleep(d);
    }
    ++st.attempts;
    ChatResponse resp;
    try {
      resp = backend.complete(req);
    } catch (const TransportError& e) {
      reasons.push_back(std::string("transport: ") + e.what());
      st.failures.push_back(reasons.back());
      if (env.transcript) env.transcript->record(req, fp, nullptr, {attempt, false, reasons.back()});
      continue;
    }
    st.latency += resp.latency;
    if (resp.usage) {
      st.usage.input_tokens += resp.usage->input_tokens;
      st.usage.output_tokens += resp.usage->output_tokens;
    }
    last_text = resp.text;
    try {
      auto value = validator(std::as_const(resp));
      if (env.transcript) env.transcript->record(req, fp, &resp, {attempt, true, {}});
      return value;
    } catch (const ValidationError& e) {
      reasons.push_back(std::string("invalid response: ") + e.what());
      st.failures.push_back(reasons.back());
      if (env.transcript) env.transcript->record(req, fp, &resp, {attempt, false, reasons.back()});
    }
  }
  throw RetriesExhausted(policy.max_attempts, std::move(last_text), std::move(reasons));
}

}  // namespace trajeval
