#include "trajeval/chat.hpp"

#include <stdexcept>

#include "trajeval/hashing.hpp"

namespace trajeval {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::segment: return "segment";
    case Stage::diagnose: return "diagnose";
    case Stage::summarize: return "summarize";
    case Stage::seg_quality: return "seg_quality";
    case Stage::baseline: return "baseline";
  }
  return "segment";
}

std::optional<Stage> stage_from_string(std::string_view s) {
  for (auto st : {Stage::segment, Stage::diagnose, Stage::summarize, Stage::seg_quality, Stage::baseline}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

std::size_t ChatRequest::image_count() const {
  std::size_t n = 0;
  for (const auto& p : user_parts) n += std::holds_alternative<ImagePart>(p) ? 1 : 0;
  return n;
}

std::string ChatRequest::joined_text() const {
  std::string out;
  for (const auto& p : user_parts) {
    if (const auto* t = std::get_if<TextPart>(&p)) {
      if (!out.empty()) out += '\n';
      out += t->text;
    }
  }
  return out;
}

void ChatRequest::validate() const {
  if (user_parts.empty()) throw std::invalid_argument("chat request has no user parts");
  if (stage == Stage::segment && image_count() > 0) {
    throw std::invalid_argument("segmentation requests must be text-only");
  }
}

std::string fingerprint(const ChatRequest& req) {
  // Length-prefixed fields keep distinct part layouts from colliding.
  std::string material;
  auto add = [&material](std::string_view tag, std::string_view v) {
    material += tag;
    material += std::to_string(v.size());
    material += ':';
    material += v;
  };
  add("system", req.system_text);
  for (const auto& p : req.user_parts) {
    if (const auto* t = std::get_if<TextPart>(&p)) {
      add("text", t->text);
    } else {
      const auto& img = std::get<ImagePart>(p);
      add("image", img.media_type + ";" + sha256_hex(img.bytes));
    }
  }
  return sha256_hex(material);
}

}  // namespace trajeval
