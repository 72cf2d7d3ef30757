#pragma once

// Prompt templates with {placeholder} substitution and content-hash versioning.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace trajeval {

struct PromptTemplate {
  std::string system;
  std::string user;

  /// Hex SHA-256 over both sections.
  std::string content_hash() const;
};

/// Template names used by the pipeline stages.
namespace prompt_names {
inline constexpr std::string_view kSegment = "segment";
inline constexpr std::string_view kDiagnose = "diagnose";
inline constexpr std::string_view kDiagnoseBare = "diagnose_bare";
inline constexpr std::string_view kSummarize = "summarize";
inline constexpr std::string_view kNaive = "naive";
inline constexpr std::string_view kAgentTrek = "agenttrek";
inline constexpr std::string_view kSegQuality = "seg_quality";
}  // namespace prompt_names

/// Placeholders each template must contain.
const std::vector<std::string>& required_placeholders(std::string_view template_name);

class PromptSet {
 public:
  /// The built-in templates.
  static PromptSet defaults();
  /// Starts from the defaults and overrides any template found in `dir` as
  /// `<name>.system.txt` / `<name>.user.txt`. Throws ConfigError on a missing placeholder.
  static PromptSet load_dir(const std::filesystem::path& dir);

  bool has(std::string_view name) const;
  /// Throws ConfigError for unknown names.
  const PromptTemplate& get(std::string_view name) const;
  void set(std::string name, PromptTemplate t);
  /// Throws ConfigError when `name` is absent or lacks a required placeholder.
  void check(std::string_view name) const;

  std::map<std::string, std::string> hashes() const;
  /// Writes every template as files loadable by load_dir.
  void write_dir(const std::filesystem::path& dir) const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

/// Replaces `{key}` for every key in `values`; other braces are left untouched.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);

}  // namespace trajeval
