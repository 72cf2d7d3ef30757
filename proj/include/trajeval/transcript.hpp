#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>

#include "trajeval/chat.hpp"

namespace trajeval {

struct AttemptMeta {
  int attempt = 1;
  bool ok = false;
  std::string reason;  // failure reason, empty on success
};

/// Append-only audit log, one line-delimited record per backend attempt.
/// A default-constructed sink is disabled and records nothing.
class TranscriptSink {
 public:
  TranscriptSink() = default;
  explicit TranscriptSink(const std::filesystem::path& path);

  bool enabled() const { return stream_.has_value(); }
  std::size_t lines_written() const;

  /// Write failures are reported on stderr and otherwise ignored.
  void record(const ChatRequest& req, const std::string& fingerprint, const ChatResponse* resp,
              const AttemptMeta& meta);

 private:
  mutable std::mutex mu_;
  std::optional<std::ofstream> stream_;
  std::filesystem::path path_;
  std::size_t lines_ = 0;
};

}  // namespace trajeval
