#include "trajeval/transcript.hpp"

#include <iostream>

#include <nlohmann/json.hpp>

namespace trajeval {

TranscriptSink::TranscriptSink(const std::filesystem::path& path) : path_(path) {
  stream_.emplace(path, std::ios::app);
  if (!*stream_) std::cerr << "warning: cannot open transcript " << path << "; audit lines will be dropped\n";
}

std::size_t TranscriptSink::lines_written() const {
  std::lock_guard lock(mu_);
  return lines_;
}

void TranscriptSink::record(const ChatRequest& req, const std::string& fingerprint, const ChatResponse* resp,
                            const AttemptMeta& meta) {
  if (!stream_) return;
  nlohmann::ordered_json line;
  line["stage"] = to_string(req.stage);
  line["fingerprint"] = fingerprint;
  line["attempt"] = meta.attempt;
  line["outcome"] = meta.ok ? "ok" : "failed";
  if (!meta.reason.empty()) line["reason"] = meta.reason;
  if (resp) {
    line["latency_ms"] = resp->latency.count();
    line["response_chars"] = resp->text.size();
  }
  const std::string text = line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::lock_guard lock(mu_);
  *stream_ << text << '\n';
  stream_->flush();
  if (!*stream_) {
    std::cerr << "warning: transcript write to " << path_ << " failed\n";
    stream_->clear();
    return;
  }
  ++lines_;
}

}  // namespace trajeval
