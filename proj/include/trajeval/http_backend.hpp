#pragma once

// OpenAI-compatible chat-completions client.

#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "trajeval/chat.hpp"

namespace trajeval {

struct HttpBackendConfig {
  /// Full URL of the chat-completions endpoint.
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model;
  /// Name of the environment variable that holds the bearer token.
  std::string token_env = "TRAJEVAL_API_TOKEN";
  int timeout_seconds = 120;
};

/// Builds the provider request body. Images become base64 data URLs.
nlohmann::json build_chat_body(const ChatRequest& req, const std::string& model);

/// Extracts the message text and usage from a provider response body. Throws TransportError.
ChatResponse parse_chat_body(const nlohmann::json& body);

class HttpBackend final : public Backend {
 public:
  /// Throws ConfigError when the endpoint is malformed or the token variable is unset.
  explicit HttpBackend(HttpBackendConfig config);

  ChatResponse complete(const ChatRequest& req) override;
  std::string name() const override { return "http:" + config_.model; }

 private:
  HttpBackendConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
  std::string token_;
};

}  // namespace trajeval
