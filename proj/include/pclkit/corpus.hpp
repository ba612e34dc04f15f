#pragma once

// Canonical record types shared by every stage, their line-oriented JSON
// persistence, and per-platform corpus statistics.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pclkit/error.hpp"

namespace pclkit {

enum class Language { EN, ZH };
enum class Source { REDDIT, WEIBO, ZHIHU, NEWS, OTHER };
enum class GroupTag { DISABLED, WOMEN, ELDERLY, CHILDREN, SINGLE_PARENT, ORDINARY, DISADVANTAGED, OTHER };
enum class Split { TRAIN, TEST, UNSPLIT };
enum class Round { PRIMARY, PROOFREAD };
enum class Subcategory { UNBALANCED_POWER, SPECTATOR, PREJUDICE, APPEAL, COMPASSION };
enum class Intensity { NONE, MILD, MODERATE, SEVERE };
enum class Stage { PT, SFT, TEST };

/// Upper-snake names used on the wire, indexed by enumerator value.
template <typename E>
struct EnumNames;

#define PCLKIT_ENUM_NAMES(E, ...)                                        \
  template <>                                                            \
  struct EnumNames<E> {                                                  \
    static constexpr std::string_view kType = #E;                        \
    static constexpr auto kNames = std::to_array<std::string_view>({__VA_ARGS__}); \
  };

PCLKIT_ENUM_NAMES(Language, "EN", "ZH")
PCLKIT_ENUM_NAMES(Source, "REDDIT", "WEIBO", "ZHIHU", "NEWS", "OTHER")
PCLKIT_ENUM_NAMES(GroupTag, "DISABLED", "WOMEN", "ELDERLY", "CHILDREN", "SINGLE_PARENT",
                  "ORDINARY", "DISADVANTAGED", "OTHER")
PCLKIT_ENUM_NAMES(Split, "TRAIN", "TEST", "UNSPLIT")
PCLKIT_ENUM_NAMES(Round, "PRIMARY", "PROOFREAD")
PCLKIT_ENUM_NAMES(Subcategory, "UNBALANCED_POWER", "SPECTATOR", "PREJUDICE", "APPEAL",
                  "COMPASSION")
PCLKIT_ENUM_NAMES(Intensity, "NONE", "MILD", "MODERATE", "SEVERE")
PCLKIT_ENUM_NAMES(Stage, "PT", "SFT", "TEST")

#undef PCLKIT_ENUM_NAMES

template <typename E>
constexpr std::string_view to_string(E value) {
  return EnumNames<E>::kNames[static_cast<std::size_t>(value)];
}

template <typename E>
constexpr std::size_t enum_count() {
  return EnumNames<E>::kNames.size();
}

template <typename E>
constexpr std::array<E, EnumNames<E>::kNames.size()> all_values() {
  std::array<E, EnumNames<E>::kNames.size()> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<E>(i);
  return out;
}

template <typename E>
E parse_enum(std::string_view name) {
  const auto& names = EnumNames<E>::kNames;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<E>(i);
  }
  throw ValidationError("unknown " + std::string(EnumNames<E>::kType) + " value '" +
                        std::string(name) + "'");
}

struct Document {
  std::string id;
  std::string text;
  Language language = Language::EN;
  Source source = Source::OTHER;
  std::optional<GroupTag> group_tag;
  bool interference = false;
  Split split = Split::UNSPLIT;
  std::optional<std::chrono::year_month_day> collected_at;

  bool operator==(const Document&) const = default;
};

struct LabelRecord {
  std::string doc_id;
  std::string annotator_id;
  Round round = Round::PRIMARY;
  bool pcl = false;
  std::set<Subcategory> subcategories;
  std::optional<GroupTag> group;
  Intensity intensity = Intensity::NONE;
  std::optional<int> dpm_level;

  bool operator==(const LabelRecord&) const = default;
};

struct FieldError {
  std::string field;
  std::string reason;

  bool operator==(const FieldError&) const = default;
};

/// Returns every invariant violation; empty means valid.
std::vector<FieldError> check(const Document& doc);
std::vector<FieldError> check(const LabelRecord& label);

/// Throws ValidationError listing the violations.
void validate(const Document& doc);
void validate(const LabelRecord& label);

struct DatasetManifest {
  std::string name;
  Stage stage = Stage::PT;
  /// Empty when records span more than one language or carry none.
  std::optional<Language> language;
  std::size_t doc_count = 0;
  std::string checksum;  // SHA-256 of the file bytes

  bool operator==(const DatasetManifest&) const = default;
};

void to_json(nlohmann::json& j, const Document& doc);
void from_json(const nlohmann::json& j, Document& doc);
void to_json(nlohmann::json& j, const LabelRecord& label);
void from_json(const nlohmann::json& j, LabelRecord& label);
void to_json(nlohmann::json& j, const DatasetManifest& m);

std::string format_date(const std::chrono::year_month_day& date);
std::chrono::year_month_day parse_date(std::string_view text);

/// Reads one record per line. Blank lines are skipped. Malformed lines and
/// invariant violations raise ParseError with the line number; a repeated
/// id raises ValidationError naming both lines.
std::vector<Document> load_documents(const std::filesystem::path& path);
/// Labels are keyed by (doc_id, annotator_id, round) for duplicate checks.
std::vector<LabelRecord> load_labels(const std::filesystem::path& path);

/// Serialized bytes exactly as save_* writes them.
std::string serialize_documents(const std::vector<Document>& docs);
std::string serialize_labels(const std::vector<LabelRecord>& labels);

DatasetManifest save_documents(const std::vector<Document>& docs,
                               const std::filesystem::path& path, std::string name = {},
                               Stage stage = Stage::PT);
DatasetManifest save_labels(const std::vector<LabelRecord>& labels,
                            const std::filesystem::path& path, std::string name = {},
                            Stage stage = Stage::SFT);

/// One label per document: a PROOFREAD record wins, otherwise the first
/// PRIMARY record in input order.
std::map<std::string, LabelRecord> resolve_final_labels(const std::vector<LabelRecord>& labels);

// ---------------------------------------------------------------------------
// Platform statistics

/// positives/total as a percentage rounded half-up to one decimal, in tenths
/// of a percent (e.g. 230 for 23.0%). Empty when total is zero.
std::optional<std::int64_t> proportion_tenths(std::size_t positives, std::size_t total);

/// Renders tenths as "23.0"; handles negatives ("-0.6").
std::string format_tenths(std::int64_t tenths);

inline constexpr std::string_view kUndefinedMarker = "n/a";

struct StatsCell {
  std::size_t total = 0;
  std::size_t positives = 0;

  std::optional<std::int64_t> proportion() const { return proportion_tenths(positives, total); }
  std::string proportion_text() const;
};

struct PlatformStats {
  using GroupKey = std::optional<GroupTag>;  // nullopt: document carries no group

  std::map<Source, std::map<GroupKey, StatsCell>> cells;
  std::map<Source, StatsCell> platform_totals;
  std::map<GroupKey, StatsCell> group_totals;
  StatsCell grand_total;

  /// Cell lookup that reports an all-zero cell for absent combinations.
  StatsCell cell(Source source, GroupKey group) const;

  /// Fixed-width table: per platform a count row, a positives row and a
  /// proportion row; then a total row.
  std::string render() const;
};

/// Joins final labels with their documents. Throws if a label references an
/// unknown document. Documents without a label are ignored.
PlatformStats compute_platform_stats(const std::vector<Document>& docs,
                                     const std::vector<LabelRecord>& labels);

}  // namespace pclkit
