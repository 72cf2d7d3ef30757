#pragma once

// Extraction of a structured record from free-form model text.

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace trajeval {

/// Key order is preserved so callers can check which field the model produced first.
using Record = nlohmann::ordered_json;

/// Tries, first success wins:
///   1. the whole text as a record;
///   2. the first fenced code block (language tag optional);
///   3. balanced-brace substrings starting at each '{', scanning string literals;
///   4. steps 1-3 again after repairs (trailing commas, smart quotes).
/// Only JSON objects count as records.
/// Throws NoStructureFound when there is no candidate, ParseFailed when no candidate parses.
Record extract_structured(std::string_view text);

/// Removes commas that directly precede '}' or ']' (ignoring whitespace), outside string literals.
std::string strip_trailing_commas(std::string_view text);

/// Maps typographic quotes to their ASCII counterparts.
std::string normalize_quotes(std::string_view text);

}  // namespace trajeval
