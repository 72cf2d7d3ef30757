#include "trajeval/extract.hpp"

#include <optional>
#include <vector>

#include "trajeval/errors.hpp"

namespace trajeval {
namespace {

constexpr std::size_t kMaxBraceStarts = 64;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<Record> parse_object(std::string_view s) {
  Record r = Record::parse(s.begin(), s.end(), nullptr, /*allow_exceptions=*/false);
  if (r.is_discarded() || !r.is_object()) return std::nullopt;
  return r;
}

std::optional<std::string_view> first_fenced_block(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto body = open + 3;
  // Anything up to the end of the opening line is a language tag.
  if (const auto nl = text.find('\n', body); nl != std::string_view::npos) {
    const auto tag = trim(text.substr(body, nl - body));
    if (tag.empty() || tag.find_first_of("{[") == std::string_view::npos) body = nl + 1;
  } else {
    const auto rest = trim(text.substr(body));
    if (!rest.empty() && rest.front() != '{') return std::nullopt;
  }
  const auto close = text.find("```", body);
  return text.substr(body, close == std::string_view::npos ? std::string_view::npos : close - body);
}

/// Substring from `start` (an opening brace) to its balanced closing brace, or the rest of the
/// text when the braces never balance.
std::string_view balanced_from(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return text.substr(start, i - start + 1);
    }
  }
  return text.substr(start);
}

struct Attempt {
  bool had_candidate = false;
  std::optional<Record> record;
};

Attempt try_extract(std::string_view text) {
  Attempt a;
  const auto whole = trim(text);
  if (!whole.empty() && whole.front() == '{') {
    a.had_candidate = true;
    if ((a.record = parse_object(whole))) return a;
  }
  if (auto block = first_fenced_block(text)) {
    a.had_candidate = true;
    if ((a.record = parse_object(trim(*block)))) return a;
  }
  std::size_t starts = 0;
  for (auto pos = text.find('{'); pos != std::string_view::npos && starts < kMaxBraceStarts;
       pos = text.find('{', pos + 1), ++starts) {
    a.had_candidate = true;
    if ((a.record = parse_object(balanced_from(text, pos)))) return a;
  }
  return a;
}

}  // namespace

std::string strip_trailing_commas(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      auto j = text.find_first_not_of(" \t\r\n", i + 1);
      if (j != std::string_view::npos && (text[j] == '}' || text[j] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

std::string normalize_quotes(std::string_view text) {
  struct Mapping {
    std::string_view from;
    char to;
  };
  static constexpr Mapping kQuotes[] = {
      {"\xE2\x80\x9C", '"'}, {"\xE2\x80\x9D", '"'}, {"\xE2\x80\x9E", '"'}, {"\xE2\x80\x9F", '"'},
      {"\xE2\x80\x98", '\''}, {"\xE2\x80\x99", '\''}, {"\xE2\x80\x9A", '\''}, {"\xE2\x80\x9B", '\''},
  };
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    bool replaced = false;
    if (static_cast<unsigned char>(text[i]) == 0xE2) {
      for (const auto& m : kQuotes) {
        if (text.substr(i, m.from.size()) == m.from) {
          out.push_back(m.to);
          i += m.from.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(text[i++]);
  }
  return out;
}

Record extract_structured(std::string_view text) {
  Attempt first = try_extract(text);
  if (first.record) return std::move(*first.record);

  const std::string repaired = strip_trailing_commas(normalize_quotes(text));
  Attempt second = try_extract(repaired);
  if (second.record) return std::move(*second.record);

  if (!first.had_candidate && !second.had_candidate) {
    throw NoStructureFound("no structured record found in model output");
  }
  throw ParseFailed("structured candidates found but none parsed");
}

}  // namespace trajeval
