#pragma once

// Provider-neutral chat request/response types and the backend interface.

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace trajeval {

enum class Stage { segment, diagnose, summarize, seg_quality, baseline };

std::string_view to_string(Stage s);
std::optional<Stage> stage_from_string(std::string_view s);

struct TextPart {
  std::string text;
};

struct ImagePart {
  std::string media_type;  // e.g. "image/png"
  std::string bytes;
};

using Part = std::variant<TextPart, ImagePart>;

struct ChatRequest {
  Stage stage = Stage::segment;
  std::string system_text;
  std::vector<Part> user_parts;
  std::optional<double> temperature;
  std::optional<int> max_output;

  std::size_t image_count() const;
  /// Concatenation of all text parts, separated by newlines.
  std::string joined_text() const;
  /// Throws std::invalid_argument when there are no user parts or a text-only stage carries images.
  void validate() const;
};

/// Stable content hash over system text, text parts and image digests (hex SHA-256).
std::string fingerprint(const ChatRequest& req);

struct Usage {
  long long input_tokens = 0;
  long long output_tokens = 0;
};

struct ChatResponse {
  std::string text;
  std::optional<Usage> usage;
  std::chrono::milliseconds latency{0};
};

class Backend {
 public:
  virtual ~Backend() = default;
  /// Thread-safe. Throws TransportError when no response could be obtained.
  virtual ChatResponse complete(const ChatRequest& req) = 0;
  virtual std::string name() const = 0;
};

}  // namespace trajeval
