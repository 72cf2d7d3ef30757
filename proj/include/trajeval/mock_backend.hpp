#pragma once

// Deterministic scripted backend for offline runs and tests.

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajeval/chat.hpp"

namespace trajeval {

/// Selects requests of one stage. An empty matcher is a stage-wide wildcard.
struct MockMatch {
  std::optional<std::string> fingerprint;
  std::optional<std::string> contains;  // substring of the request's joined text
};

enum class FaultMode { transport, garbage };

struct MockCall {
  Stage stage;
  std::string fingerprint;
  bool faulted = false;
};

/// Resolution order per request: exact fingerprint rules, then `contains` rules in insertion
/// order, then handlers, then the stage wildcard. Unmatched requests raise TransportError.
/// Fault rules fail the first `fail_first` calls of each distinct request they match.
class MockBackend final : public Backend {
 public:
  using Handler = std::function<std::optional<std::string>(const ChatRequest&)>;

  MockBackend() = default;

  void add_response(Stage stage, MockMatch match, std::string text);
  void add_handler(Stage stage, Handler handler);
  void add_fault(Stage stage, MockMatch match, int fail_first, FaultMode mode = FaultMode::transport);

  /// Script format: {"responses": [{stage, fingerprint?, contains?, text}],
  ///                 "faults": [{stage, fingerprint?, contains?, fail_first, mode?}]}
  static std::unique_ptr<MockBackend> from_json(const nlohmann::json& script);
  static std::unique_ptr<MockBackend> load(const std::filesystem::path& path);

  ChatResponse complete(const ChatRequest& req) override;
  std::string name() const override { return "mock"; }

  std::vector<MockCall> calls() const;
  std::size_t call_count() const;
  std::size_t call_count(Stage stage) const;
  void clear_calls();

 private:
  struct Rule {
    Stage stage;
    MockMatch match;
    std::string text;
  };
  struct Fault {
    Stage stage;
    MockMatch match;
    int fail_first;
    FaultMode mode;
    // Remaining failures per request fingerprint.
    std::map<std::string, std::shared_ptr<std::atomic<int>>> remaining;
  };

  static bool matches(const MockMatch& m, const std::string& fp, const std::string& text);
  std::optional<std::string> resolve(const ChatRequest& req, const std::string& fp, const std::string& text) const;

  mutable std::mutex mu_;
  std::vector<Rule> rules_;
  std::vector<std::pair<Stage, Handler>> handlers_;
  std::vector<Fault> faults_;
  std::vector<MockCall> calls_;
};

}  // namespace trajeval
