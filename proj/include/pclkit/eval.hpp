#pragma once

// Scoring classifier outputs against gold labels: free-text output mapping,
// two-class macro metrics, per-group and per-subcategory breakdowns, and the
// interference-sample scenarios.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pclkit/corpus.hpp"

namespace pclkit {

enum class Mapped { POSITIVE, NEGATIVE, UNKNOWN };
template <>
struct EnumNames<Mapped> {
  static constexpr std::string_view kType = "Mapped";
  static constexpr auto kNames = std::to_array<std::string_view>({"POSITIVE", "NEGATIVE", "UNKNOWN"});
};

enum class UnknownPolicy { COUNT_AS_NEGATIVE, COUNT_AS_WRONG };
template <>
struct EnumNames<UnknownPolicy> {
  static constexpr std::string_view kType = "UnknownPolicy";
  static constexpr auto kNames =
      std::to_array<std::string_view>({"COUNT_AS_NEGATIVE", "COUNT_AS_WRONG"});
};

enum class Scenario { S_NONE, S_FEW, S_ALL };
template <>
struct EnumNames<Scenario> {
  static constexpr std::string_view kType = "Scenario";
  static constexpr auto kNames = std::to_array<std::string_view>({"S_NONE", "S_FEW", "S_ALL"});
};

struct Cue {
  std::string phrase;
  Mapped label = Mapped::UNKNOWN;
};

/// Ordered cue phrases per language. The first cue in list order that occurs
/// in the output (case-insensitively) decides the label.
struct MappingConfig {
  std::map<Language, std::vector<Cue>> cues;
};

const MappingConfig& default_mapping_config();
MappingConfig mapping_config_from_json(const nlohmann::json& j);

Mapped map_output(std::string_view raw, Language language, const MappingConfig& config);

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t unknown_count = 0;

  std::size_t n() const { return tp + fp + fn + tn + unknown_count; }
  Confusion& operator+=(const Confusion& o);
  bool operator==(const Confusion&) const = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricReport {
  Confusion confusion;
  Prf positive;
  Prf negative;
  Prf macro;     // unweighted mean of the two classes
  Prf weighted;  // mean weighted by gold support
};

/// Per-class precision, recall and F1 for the positive and negative classes
/// (0 where a denominator is 0), their unweighted mean and a support-weighted
/// mean. UNKNOWN predictions are kept in confusion.unknown_count; for the
/// metrics they count as a negative prediction or as a miss (the opposite of
/// the gold label) depending on the policy. Throws on empty or mismatched
/// input.
MetricReport macro_prf(std::span<const bool> gold, std::span<const Mapped> pred,
                       UnknownPolicy policy = UnknownPolicy::COUNT_AS_WRONG);
MetricReport macro_prf(const std::vector<bool>& gold, const std::vector<Mapped>& pred,
                       UnknownPolicy policy = UnknownPolicy::COUNT_AS_WRONG);

struct GroupedRecord {
  bool gold = false;
  Mapped pred = Mapped::UNKNOWN;
  GroupTag group = GroupTag::OTHER;
};

struct SubcategoryRecord {
  bool gold = false;
  Mapped pred = Mapped::UNKNOWN;
  Subcategory subcategory = Subcategory::UNBALANCED_POWER;
};

std::map<GroupTag, MetricReport> group_breakdown(const std::vector<GroupedRecord>& records,
                                                 UnknownPolicy policy = UnknownPolicy::COUNT_AS_WRONG);
std::map<Subcategory, MetricReport> subcategory_breakdown(
    const std::vector<SubcategoryRecord>& records,
    UnknownPolicy policy = UnknownPolicy::COUNT_AS_WRONG);

/// Percent rounded to tenths, e.g. 0.7333 -> 733.
std::int64_t percent_tenths(double fraction);
/// Tenths of a percentage given in percent, e.g. 69.4 -> 694.
std::int64_t tenths_of(double percent);
/// Signed one-decimal difference of two percentages as displayed, e.g.
/// (66.5, 69.4) -> "+2.9". Zero renders as "0.0".
std::string format_delta(double from_percent, double to_percent);

struct RawPrediction {
  std::string doc_id;
  std::string raw_output;
  std::optional<bool> label;  // direct label, bypasses output mapping
};

/// JSON lines with doc_id and raw_output, or doc_id and a boolean label.
std::vector<RawPrediction> load_predictions(const std::filesystem::path& path);
void to_json(nlohmann::json& j, const RawPrediction& p);

/// Maps every prediction; language comes from the document (EN if unknown).
std::map<std::string, Mapped> map_predictions(const std::vector<RawPrediction>& preds,
                                              const std::vector<Document>& docs,
                                              const MappingConfig& config);

struct EvalOptions {
  UnknownPolicy policy = UnknownPolicy::COUNT_AS_WRONG;
  bool by_group = false;
  bool by_subcategory = false;
};

struct EvalReport {
  UnknownPolicy policy = UnknownPolicy::COUNT_AS_WRONG;
  std::optional<Scenario> scenario;
  MetricReport overall;
  std::size_t missing_predictions = 0;
  std::map<GroupTag, MetricReport> per_group;
  std::size_t ungrouped = 0;
  std::map<Subcategory, MetricReport> per_subcategory;
};

/// Evaluates every document in `items` against its final gold label.
/// Missing predictions count as UNKNOWN. Subcategory subsets hold the gold
/// positives carrying that subcategory plus every gold negative.
EvalReport evaluate(const std::vector<Document>& items,
                    const std::map<std::string, LabelRecord>& gold,
                    const std::map<std::string, Mapped>& predictions, const EvalOptions& options);

void to_json(nlohmann::json& j, const MetricReport& m);
void to_json(nlohmann::json& j, const EvalReport& r);
/// Machine-readable summary bytes (pretty JSON with trailing newline).
std::string eval_summary(const EvalReport& report);
/// Human-readable report with one-decimal percentages.
std::string render_report(const EvalReport& report);

struct InterferenceResult {
  EvalReport none;
  EvalReport few;
  EvalReport all;
  std::size_t flagged = 0;
  std::size_t few_selected = 0;
  std::string delta_few_vs_none;
  std::string delta_all_vs_none;
  std::string delta_all_vs_few;
};

/// S_NONE: unflagged documents; S_FEW: plus a seeded selection of
/// round(few_fraction * flagged) flagged documents (at least one); S_ALL:
/// every document. Deltas compare macro F1 percentages. Throws if the pool
/// has no flagged document or few_fraction is outside (0, 1].
InterferenceResult interference_experiment(const std::vector<Document>& pool,
                                           const std::map<std::string, LabelRecord>& gold,
                                           const std::map<std::string, Mapped>& predictions,
                                           double few_fraction, std::uint64_t seed,
                                           UnknownPolicy policy = UnknownPolicy::COUNT_AS_WRONG);

inline constexpr double kDefaultFewFraction = 0.5;

void to_json(nlohmann::json& j, const InterferenceResult& r);

}  // namespace pclkit
