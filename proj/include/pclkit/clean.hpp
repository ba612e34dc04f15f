#pragma once

// Cleaning of raw social-media exports: boilerplate tag removal, user
// redaction, emoji-to-text conversion, short-text removal and deduplication.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pclkit/corpus.hpp"

namespace pclkit {

struct CleaningConfig {
  std::vector<std::string> boilerplate_patterns;
  /// Emoji code point sequence (UTF-8) to replacement text. Replacements are
  /// emitted in square brackets; a value already bracketed is used as is.
  std::map<std::string, std::string> emoji_map;
  std::string redaction_token = "#USER";
  std::map<GroupTag, std::vector<std::string>> keyword_lists;
  /// Texts with fewer code points after cleaning are dropped. 0 disables.
  std::size_t min_length = 5;

  void validate() const;
  /// True when every one of the eight groups has exactly 20 search terms.
  bool matches_collection_setup() const;
};

inline constexpr std::size_t kKeywordsPerGroup = 20;

/// JSON object with keys boilerplate_patterns, emoji_map, redaction_token,
/// keyword_lists (GroupTag name -> terms) and min_length. Missing keys keep
/// their defaults.
CleaningConfig load_cleaning_config(const std::filesystem::path& path);
CleaningConfig cleaning_config_from_json(const nlohmann::json& j);

/// A transformed text and the number of edits made to produce it.
struct Edited {
  std::string text;
  std::size_t count = 0;
};

Edited strip_boilerplate_counted(std::string_view text, const CleaningConfig& config);
Edited redact_users_counted(std::string_view text, const CleaningConfig& config);
Edited emojis_to_text_counted(std::string_view text, const CleaningConfig& config);

/// Removes every configured literal tag; when anything was removed the
/// whitespace of the result is collapsed to single spaces and trimmed.
std::string strip_boilerplate(std::string_view text, const CleaningConfig& config);

/// Replaces each at-mention with the redaction token. A mention is '@' or
/// '＠' followed by a maximal non-empty run of letters, marks, digits, '_'
/// or '-'; whitespace, other punctuation, symbols and colons end it.
std::string redact_users(std::string_view text, const CleaningConfig& config);

/// Replaces mapped emoji sequences (longest first) with bracketed text.
/// Unmapped emoji are left as they are.
std::string emojis_to_text(std::string_view text, const CleaningConfig& config);

/// True if `text` still contains something the mention pattern matches.
bool contains_mention(std::string_view text);

/// NFKC-normalized, whitespace-collapsed text.
std::string dedupe_key(std::string_view text);

/// Keeps the first document for each dedupe key, in input order.
std::vector<Document> dedupe(const std::vector<Document>& docs);

/// First group (in enum order) with a keyword occurring in the text.
std::optional<GroupTag> group_from_keywords(std::string_view text, const CleaningConfig& config);

struct CleanReport {
  std::size_t input_count = 0;
  std::size_t removed_dupes = 0;
  std::size_t removed_short = 0;
  std::size_t redactions = 0;
  std::size_t tag_removals = 0;
  std::size_t emoji_conversions = 0;
  std::size_t groups_assigned = 0;
  std::size_t output_count = 0;

  bool operator==(const CleanReport&) const = default;
};

void to_json(nlohmann::json& j, const CleanReport& r);

struct CleanResult {
  std::vector<Document> docs;
  CleanReport report;
};

/// strip_boilerplate -> redact_users -> emojis_to_text per document, then
/// drops texts shorter than min_length, then dedupe. Untagged documents get
/// a group from the keyword lists when one matches.
CleanResult clean_pipeline(const std::vector<Document>& docs, const CleaningConfig& config);

}  // namespace pclkit
