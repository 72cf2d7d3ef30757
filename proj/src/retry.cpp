#include "trajeval/retry.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace trajeval {

RetriesExhausted::RetriesExhausted(int attempts, std::string last_text, std::vector<std::string> reasons)
    : Error("retries exhausted after " + std::to_string(attempts) + " attempts" +
            (reasons.empty() ? std::string() : ": " + reasons.back())),
      attempts_(attempts),
      last_text_(std::move(last_text)),
      reasons_(std::move(reasons)) {}

void RetryPolicy::validate() const {
  if (max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
  if (factor < 1.0) throw ConfigError("retry.factor must be >= 1");
  if (base_delay.count() < 0) throw ConfigError("retry.base_delay must be non-negative");
  if (base_delay > max_delay) throw ConfigError("retry.base_delay must not exceed retry.max_delay");
  if (jitter_fraction < 0.0 || jitter_fraction > 1.0) throw ConfigError("retry.jitter_fraction must lie in [0, 1]");
}

Millis RetryPolicy::pre_jitter_delay(int attempt) const {
  if (attempt < 2) return Millis{0};
  const double raw = static_cast<double>(base_delay.count()) * std::pow(factor, attempt - 2);
  const double capped = std::min(raw, static_cast<double>(max_delay.count()));
  return Millis{static_cast<Millis::rep>(std::llround(capped))};
}

Millis apply_jitter(Millis base, double jitter_fraction, std::mt19937_64& rng) {
  if (jitter_fraction <= 0.0 || base.count() == 0) return base;
  std::uniform_real_distribution<double> dist(1.0 - jitter_fraction, 1.0 + jitter_fraction);
  return Millis{static_cast<Millis::rep>(std::llround(static_cast<double>(base.count()) * dist(rng)))};
}

void CallOptions::apply(ChatRequest& req) const {
  if (auto it = temperatures.find(req.stage); it != temperatures.end()) req.temperature = it->second;
  req.max_output = max_output;
}

void RealSleeper::sleep(Millis d) { std::this_thread::sleep_for(d); }

void VirtualClock::sleep(Millis d) {
  std::lock_guard lock(mu_);
  now_ += d;
  sleeps_.push_back(d);
}

Millis VirtualClock::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

std::vector<Millis> VirtualClock::sleeps() const {
  std::lock_guard lock(mu_);
  return sleeps_;
}

Millis AttemptStats::elapsed() const {
  Millis total = latency;
  for (auto d : delays) total += d;
  return total;
}

void AttemptStats::merge(const AttemptStats& other) {
  attempts += other.attempts;
  pre_jitter_delays.insert(pre_jitter_delays.end(), other.pre_jitter_delays.begin(), other.pre_jitter_delays.end());
  delays.insert(delays.end(), other.delays.begin(), other.delays.end());
  failures.insert(failures.end(), other.failures.begin(), other.failures.end());
  latency += other.latency;
  usage.input_tokens += other.usage.input_tokens;
  usage.output_tokens += other.usage.output_tokens;
}

}  // namespace trajeval
