#include "pclkit/clean.hpp"

#include <algorithm>
#include <unordered_set>

#include "pclkit/io.hpp"
#include "pclkit/utf8.hpp"

namespace pclkit {

using nlohmann::json;

namespace {

constexpr char32_t kAt = U'@';
constexpr char32_t kFullWidthAt = U'＠';

bool is_at(char32_t cp) { return cp == kAt || cp == kFullWidthAt; }

bool is_mention_char(char32_t cp) {
  return cp == U'_' || cp == U'-' || utf8::is_word_char(cp);
}

// Byte offset just past the mention starting at the '@' at `pos`, or `pos`
// when the '@' is not followed by any mention character.
std::size_t mention_end(std::string_view text, std::size_t after_at) {
  std::size_t pos = after_at;
  while (pos < text.size()) {
    const auto cp = utf8::decode_at(text, pos);
    if (!is_mention_char(cp.value)) break;
    pos = cp.end;
  }
  return pos;
}

std::string bracketed(const std::string& replacement) {
  if (replacement.size() >= 2 && replacement.front() == '[' && replacement.back() == ']') {
    return replacement;
  }
  return "[" + replacement + "]";
}

}  // namespace

void CleaningConfig::validate() const {
  if (redaction_token.empty()) throw ValidationError("redaction_token must be non-empty");
  if (contains_mention(redaction_token) ||
      redaction_token.find('@') != std::string::npos) {
    throw ValidationError("redaction_token must not contain '@'");
  }
  for (const auto& p : boilerplate_patterns) {
    if (p.empty()) throw ValidationError("boilerplate pattern must be non-empty");
  }
  for (const auto& [key, value] : emoji_map) {
    if (key.empty() || !utf8::is_valid(key)) {
      throw ValidationError("emoji_map key must be a non-empty UTF-8 code point sequence");
    }
    const std::string out = bracketed(value);
    for (const auto& [other, _] : emoji_map) {
      if (out.find(other) != std::string::npos) {
        throw ValidationError("emoji replacement '" + value + "' contains a mapped emoji");
      }
    }
  }
}

bool CleaningConfig::matches_collection_setup() const {
  if (keyword_lists.size() != enum_count<GroupTag>()) return false;
  return std::all_of(keyword_lists.begin(), keyword_lists.end(),
                     [](const auto& kv) { return kv.second.size() == kKeywordsPerGroup; });
}

CleaningConfig cleaning_config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("cleaning config must be a JSON object");
  CleaningConfig config;
  try {
    if (j.contains("boilerplate_patterns")) {
      config.boilerplate_patterns = j.at("boilerplate_patterns").get<std::vector<std::string>>();
    }
    if (j.contains("emoji_map")) {
      config.emoji_map = j.at("emoji_map").get<std::map<std::string, std::string>>();
    }
    if (j.contains("redaction_token")) {
      config.redaction_token = j.at("redaction_token").get<std::string>();
    }
    if (j.contains("min_length")) config.min_length = j.at("min_length").get<std::size_t>();
    if (j.contains("keyword_lists")) {
      for (const auto& [group, terms] : j.at("keyword_lists").items()) {
        config.keyword_lists[parse_enum<GroupTag>(group)] = terms.get<std::vector<std::string>>();
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("cleaning config: ") + e.what());
  }
  config.validate();
  return config;
}

CleaningConfig load_cleaning_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return cleaning_config_from_json(j);
}

Edited strip_boilerplate_counted(std::string_view text, const CleaningConfig& config) {
  std::vector<std::string_view> patterns(config.boilerplate_patterns.begin(),
                                         config.boilerplate_patterns.end());
  std::sort(patterns.begin(), patterns.end(),
            [](auto a, auto b) { return a.size() > b.size(); });

  Edited out{std::string(text), 0};
  // Removing one tag can splice together another; repeat until stable.
  for (bool changed = true; changed;) {
    changed = false;
    for (auto pattern : patterns) {
      if (pattern.empty()) continue;
      std::size_t pos = 0;
      while ((pos = out.text.find(pattern, pos)) != std::string::npos) {
        out.text.erase(pos, pattern.size());
        ++out.count;
        changed = true;
      }
    }
  }
  if (out.count > 0) out.text = utf8::collapse_whitespace(out.text);
  return out;
}

std::string strip_boilerplate(std::string_view text, const CleaningConfig& config) {
  return strip_boilerplate_counted(text, config).text;
}

Edited redact_users_counted(std::string_view text, const CleaningConfig& config) {
  Edited out;
  out.text.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    const auto cp = utf8::decode_at(text, pos);
    if (is_at(cp.value)) {
      const std::size_t end = mention_end(text, cp.end);
      if (end > cp.end) {
        out.text += config.redaction_token;
        ++out.count;
        pos = end;
        continue;
      }
    }
    out.text.append(text.substr(cp.begin, cp.end - cp.begin));
    pos = cp.end;
  }
  return out;
}

std::string redact_users(std::string_view text, const CleaningConfig& config) {
  return redact_users_counted(text, config).text;
}

bool contains_mention(std::string_view text) {
  for (std::size_t pos = 0; pos < text.size();) {
    const auto cp = utf8::decode_at(text, pos);
    if (is_at(cp.value) && mention_end(text, cp.end) > cp.end) return true;
    pos = cp.end;
  }
  return false;
}

Edited emojis_to_text_counted(std::string_view text, const CleaningConfig& config) {
  Edited out;
  if (config.emoji_map.empty()) {
    out.text = std::string(text);
    return out;
  }
  std::vector<std::pair<std::string_view, std::string>> keys;
  for (const auto& [k, v] : config.emoji_map) keys.emplace_back(k, bracketed(v));
  std::stable_sort(keys.begin(), keys.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

  out.text.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    bool replaced = false;
    for (const auto& [key, replacement] : keys) {
      if (text.substr(pos).starts_with(key)) {
        out.text += replacement;
        ++out.count;
        pos += key.size();
        replaced = true;
        break;
      }
    }
    if (replaced) continue;
    const auto cp = utf8::decode_at(text, pos);
    out.text.append(text.substr(cp.begin, cp.end - cp.begin));
    pos = cp.end;
  }
  return out;
}

std::string emojis_to_text(std::string_view text, const CleaningConfig& config) {
  return emojis_to_text_counted(text, config).text;
}

std::string dedupe_key(std::string_view text) {
  return utf8::collapse_whitespace(utf8::nfkc(text));
}

std::vector<Document> dedupe(const std::vector<Document>& docs) {
  std::unordered_set<std::string> seen;
  std::vector<Document> out;
  for (const auto& d : docs) {
    if (seen.insert(dedupe_key(d.text)).second) out.push_back(d);
  }
  return out;
}

std::optional<GroupTag> group_from_keywords(std::string_view text, const CleaningConfig& config) {
  const std::string folded = utf8::fold_case(text);
  for (const auto& [group, terms] : config.keyword_lists) {
    for (const auto& term : terms) {
      if (!term.empty() && folded.find(utf8::fold_case(term)) != std::string::npos) return group;
    }
  }
  return std::nullopt;
}

void to_json(json& j, const CleanReport& r) {
  j = json{{"input_count", r.input_count},
           {"removed_dupes", r.removed_dupes},
           {"removed_short", r.removed_short},
           {"redactions", r.redactions},
           {"tag_removals", r.tag_removals},
           {"emoji_conversions", r.emoji_conversions},
           {"groups_assigned", r.groups_assigned},
           {"output_count", r.output_count}};
}

CleanResult clean_pipeline(const std::vector<Document>& docs, const CleaningConfig& config) {
  config.validate();
  CleanResult result;
  result.report.input_count = docs.size();

  std::vector<Document> transformed;
  transformed.reserve(docs.size());
  for (const auto& doc : docs) {
    Document d = doc;
    auto stripped = strip_boilerplate_counted(d.text, config);
    auto redacted = redact_users_counted(stripped.text, config);
    auto converted = emojis_to_text_counted(redacted.text, config);
    result.report.tag_removals += stripped.count;
    result.report.redactions += redacted.count;
    result.report.emoji_conversions += converted.count;
    d.text = std::move(converted.text);

    const std::string trimmed = utf8::trim(d.text);
    if (trimmed.empty() || utf8::length(trimmed) < config.min_length) {
      ++result.report.removed_short;
      continue;
    }
    if (!d.group_tag) {
      if (auto group = group_from_keywords(d.text, config)) {
        d.group_tag = group;
        ++result.report.groups_assigned;
      }
    }
    transformed.push_back(std::move(d));
  }

  result.docs = dedupe(transformed);
  result.report.removed_dupes = transformed.size() - result.docs.size();
  result.report.output_count = result.docs.size();
  return result;
}

}  // namespace pclkit
