#include "trajeval/mock_backend.hpp"

#include <fstream>

#include "trajeval/errors.hpp"

namespace trajeval {
using nlohmann::json;

void MockBackend::add_response(Stage stage, MockMatch match, std::string text) {
  std::lock_guard lock(mu_);
  rules_.push_back({stage, std::move(match), std::move(text)});
}

void MockBackend::add_handler(Stage stage, Handler handler) {
  std::lock_guard lock(mu_);
  handlers_.emplace_back(stage, std::move(handler));
}

void MockBackend::add_fault(Stage stage, MockMatch match, int fail_first, FaultMode mode) {
  std::lock_guard lock(mu_);
  faults_.push_back({stage, std::move(match), fail_first, mode, {}});
}

bool MockBackend::matches(const MockMatch& m, const std::string& fp, const std::string& text) {
  if (m.fingerprint && *m.fingerprint != fp) return false;
  if (m.contains && text.find(*m.contains) == std::string::npos) return false;
  return true;
}

std::optional<std::string> MockBackend::resolve(const ChatRequest& req, const std::string& fp,
                                                const std::string& text) const {
  for (const auto& r : rules_) {
    if (r.stage == req.stage && r.match.fingerprint && matches(r.match, fp, text)) return r.text;
  }
  for (const auto& r : rules_) {
    if (r.stage == req.stage && !r.match.fingerprint && r.match.contains && matches(r.match, fp, text)) return r.text;
  }
  for (const auto& [stage, handler] : handlers_) {
    if (stage != req.stage) continue;
    if (auto out = handler(req)) return out;
  }
  for (const auto& r : rules_) {
    if (r.stage == req.stage && !r.match.fingerprint && !r.match.contains) return r.text;
  }
  return std::nullopt;
}

ChatResponse MockBackend::complete(const ChatRequest& req) {
  const std::string fp = fingerprint(req);
  const std::string text = req.joined_text();

  std::shared_ptr<std::atomic<int>> counter;
  FaultMode mode = FaultMode::transport;
  std::optional<std::string> reply;
  {
    std::lock_guard lock(mu_);
    for (auto& f : faults_) {
      if (f.stage != req.stage || !matches(f.match, fp, text)) continue;
      auto& slot = f.remaining[fp];
      if (!slot) slot = std::make_shared<std::atomic<int>>(f.fail_first);
      counter = slot;
      mode = f.mode;
      break;
    }
    reply = resolve(req, fp, text);
  }

  bool faulted = false;
  if (counter && counter->fetch_sub(1) > 0) faulted = true;
  {
    std::lock_guard lock(mu_);
    calls_.push_back({req.stage, fp, faulted});
  }
  if (faulted) {
    if (mode == FaultMode::transport) throw TransportError("mock: injected fault");
    return ChatResponse{"<<injected garbage>>", std::nullopt, std::chrono::milliseconds{0}};
  }
  if (!reply) throw TransportError("mock: no scripted response for stage " + std::string(to_string(req.stage)));
  return ChatResponse{*reply, Usage{static_cast<long long>(text.size() / 4), static_cast<long long>(reply->size() / 4)},
                      std::chrono::milliseconds{0}};
}

std::vector<MockCall> MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t MockBackend::call_count() const {
  std::lock_guard lock(mu_);
  return calls_.size();
}

std::size_t MockBackend::call_count(Stage stage) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& c : calls_) n += c.stage == stage ? 1 : 0;
  return n;
}

void MockBackend::clear_calls() {
  std::lock_guard lock(mu_);
  calls_.clear();
}

namespace {

Stage parse_stage(const json& entry) {
  const auto name = entry.at("stage").get<std::string>();
  auto stage = stage_from_string(name);
  if (!stage) throw ConfigError("mock script: unknown stage '" + name + "'");
  return *stage;
}

MockMatch parse_match(const json& entry) {
  MockMatch m;
  if (entry.contains("fingerprint")) m.fingerprint = entry["fingerprint"].get<std::string>();
  if (entry.contains("contains")) m.contains = entry["contains"].get<std::string>();
  return m;
}

}  // namespace

std::unique_ptr<MockBackend> MockBackend::from_json(const json& script) {
  auto mock = std::make_unique<MockBackend>();
  try {
    for (const auto& r : script.value("responses", json::array())) {
      // Responses may be given as a record, which is serialized verbatim.
      const auto& t = r.at("text");
      mock->add_response(parse_stage(r), parse_match(r), t.is_string() ? t.get<std::string>() : t.dump());
    }
    for (const auto& f : script.value("faults", json::array())) {
      const auto mode_name = f.value("mode", std::string("transport"));
      if (mode_name != "transport" && mode_name != "garbage") {
        throw ConfigError("mock script: unknown fault mode '" + mode_name + "'");
      }
      mock->add_fault(parse_stage(f), parse_match(f), f.at("fail_first").get<int>(),
                      mode_name == "garbage" ? FaultMode::garbage : FaultMode::transport);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mock script: ") + e.what());
  }
  return mock;
}

std::unique_ptr<MockBackend> MockBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script " + path.string());
  json script = json::parse(in, nullptr, false);
  if (script.is_discarded()) throw ConfigError("mock script " + path.string() + " is not valid JSON");
  return from_json(script);
}

}  // namespace trajeval
