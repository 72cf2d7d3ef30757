#include "trajeval/http_backend.hpp"

#include <chrono>
#include <cstdlib>

#include <httplib.h>

#include "trajeval/errors.hpp"
#include "trajeval/hashing.hpp"

namespace trajeval {
using nlohmann::json;

json build_chat_body(const ChatRequest& req, const std::string& model) {
  json content = json::array();
  for (const auto& part : req.user_parts) {
    if (const auto* t = std::get_if<TextPart>(&part)) {
      content.push_back({{"type", "text"}, {"text", t->text}});
    } else {
      const auto& img = std::get<ImagePart>(part);
      content.push_back(
          {{"type", "image_url"},
           {"image_url", {{"url", "data:" + img.media_type + ";base64," + base64_encode(img.bytes)}}}});
    }
  }
  json messages = json::array();
  if (!req.system_text.empty()) messages.push_back({{"role", "system"}, {"content", req.system_text}});
  messages.push_back({{"role", "user"}, {"content", std::move(content)}});
  json body = {{"model", model}, {"messages", std::move(messages)}};
  if (req.temperature) body["temperature"] = *req.temperature;
  if (req.max_output) body["max_tokens"] = *req.max_output;
  return body;
}

ChatResponse parse_chat_body(const json& body) {
  ChatResponse resp;
  try {
    const auto& message = body.at("choices").at(0).at("message");
    const auto& content = message.at("content");
    if (content.is_string()) {
      resp.text = content.get<std::string>();
    } else if (content.is_array()) {
      for (const auto& p : content) {
        if (p.value("type", "") == "text") resp.text += p.value("text", "");
      }
    } else if (!content.is_null()) {
      throw TransportError("unexpected message content type");
    }
    if (auto u = body.find("usage"); u != body.end() && u->is_object()) {
      resp.usage = Usage{u->value("prompt_tokens", 0LL), u->value("completion_tokens", 0LL)};
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed provider response: ") + e.what());
  }
  return resp;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("backend endpoint must be an absolute URL");
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  origin_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
  if (config_.model.empty()) throw ConfigError("backend model name is empty");
  const char* token = std::getenv(config_.token_env.c_str());
  if (!token || !*token) throw ConfigError("environment variable " + config_.token_env + " is not set");
  token_ = token;
}

ChatResponse HttpBackend::complete(const ChatRequest& req) {
  const auto start = std::chrono::steady_clock::now();
  // One client per call: httplib clients are not safe for concurrent use.
  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout_seconds);
  client.set_read_timeout(config_.timeout_seconds);
  client.set_write_timeout(config_.timeout_seconds);
  httplib::Headers headers = {{"Authorization", "Bearer " + token_}};
  const std::string payload = build_chat_body(req, config_.model).dump();
  auto res = client.Post(path_, headers, payload, "application/json");
  if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
  }
  json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw TransportError("provider response is not JSON");
  ChatResponse resp = parse_chat_body(body);
  resp.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return resp;
}

}  // namespace trajeval
