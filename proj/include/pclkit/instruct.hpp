#pragma once

// Supervised fine-tuning samples: the fixed PCL description instruction, the
// optional toxicity-intensity clause, comment/reply pair handling, offensive
// pair removal, length discards and DPM label binarization.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pclkit/corpus.hpp"
#include "pclkit/lexicon.hpp"

namespace pclkit {

struct LanguageTemplate {
  std::string description_text;
  /// Must contain kLevelPlaceholder exactly once.
  std::string intensity_clause;
  std::string positive_token;
  std::string negative_token;
  std::size_t max_input_units = 0;  // Unicode scalar values
  std::map<Intensity, std::string> level_names;
  std::map<Subcategory, std::string> subcategory_names;

  bool operator==(const LanguageTemplate&) const = default;
};

inline constexpr std::string_view kLevelPlaceholder = "{level}";

struct TemplateConfig {
  std::string version;
  std::map<Language, LanguageTemplate> languages;
  std::string pair_separator = "⟦SEP⟧";
  int dpm_threshold = 2;

  const LanguageTemplate& language(Language lang) const;
  void validate() const;
};

/// Built-in EN and ZH templates.
const TemplateConfig& default_template_config();
TemplateConfig load_template_config(const std::filesystem::path& path);
TemplateConfig template_config_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const TemplateConfig& config);

struct SampleMeta {
  std::string source;
  std::string doc_id;
  std::optional<Intensity> intensity;
  std::set<Subcategory> subcategories;

  bool operator==(const SampleMeta&) const = default;
};

struct InstructionSample {
  std::string instruction;
  std::string input;
  std::string output;
  Language language = Language::EN;
  SampleMeta meta;

  bool operator==(const InstructionSample&) const = default;
};

std::vector<FieldError> check(const InstructionSample& sample, const TemplateConfig& config);
void validate(const InstructionSample& sample, const TemplateConfig& config);

/// The fixed description block for a language. Throws if the config has no
/// template for it.
const std::string& build_description_instruction(Language language, const TemplateConfig& config);

InstructionSample build_sample(const Document& doc, const LabelRecord& label,
                               std::optional<Intensity> intensity, bool include_intensity,
                               const TemplateConfig& config, std::string source = "cpcl");

/// comment + " " + separator + " " + reply. Throws if either side is empty or
/// contains the separator.
std::string concat_pair(std::string_view comment, std::string_view reply,
                        const TemplateConfig& config);
std::pair<std::string, std::string> split_pair(std::string_view joined,
                                               const TemplateConfig& config);

enum class PairLabel { PCL, NOT_PCL, UNSURE };
template <>
struct EnumNames<PairLabel> {
  static constexpr std::string_view kType = "PairLabel";
  static constexpr auto kNames = std::to_array<std::string_view>({"PCL", "NOT_PCL", "UNSURE"});
};

struct TextPair {
  std::string id;
  std::string comment;
  std::string reply;
  PairLabel label = PairLabel::NOT_PCL;

  bool operator==(const TextPair&) const = default;
};

/// JSON lines with id, comment, reply, label.
std::vector<TextPair> load_pairs(const std::filesystem::path& path);
void to_json(nlohmann::json& j, const TextPair& p);

struct PairFilterResult {
  std::vector<TextPair> kept;
  std::size_t removed = 0;
};

/// Drops every pair whose comment or reply contains a relevant term of the
/// offensive lexicon.
PairFilterResult filter_offensive_pairs(const std::vector<TextPair>& pairs,
                                        const Matcher& offensive);

/// The sample when its input has at most max_input_units code points.
std::optional<InstructionSample> enforce_length(const InstructionSample& sample,
                                                const TemplateConfig& config);

/// level >= threshold. Throws for levels outside 0..4.
bool binarize_dpm(int level, int threshold = 2);

enum class SftDataset { DPM, TD, CPCL };
template <>
struct EnumNames<SftDataset> {
  static constexpr std::string_view kType = "SftDataset";
  static constexpr auto kNames = std::to_array<std::string_view>({"DPM", "TD", "CPCL"});
};

struct SftOptions {
  SftDataset dataset = SftDataset::CPCL;
  bool with_intensity = false;
  /// doc id (or pair id) -> toxicity score, used for the intensity clause.
  std::map<std::string, double> scores;
};

struct SftReport {
  std::size_t inputs = 0;
  std::size_t unsure_dropped = 0;
  std::size_t unlabeled = 0;
  std::size_t offensive_removed = 0;
  std::size_t length_discarded = 0;
  std::size_t exported = 0;
  std::vector<std::string> discarded_ids;

  bool conserved() const { return exported == inputs - offensive_removed - length_discarded; }
};

void to_json(nlohmann::json& j, const SftReport& r);

struct SftResult {
  std::vector<InstructionSample> samples;  // ordered by doc id
  SftReport report;
};

/// DPM and CPCL: one sample per non-test document with a final label. DPM
/// labels are binarized from dpm_level. `inputs` counts labeled documents.
SftResult build_sft_from_labels(const std::vector<Document>& docs,
                                const std::vector<LabelRecord>& labels, const SftOptions& options,
                                const TemplateConfig& config);

/// TD: drops UNSURE pairs, removes offensive pairs, joins the rest and
/// discards over-long inputs. `inputs` counts pairs after the UNSURE drop.
SftResult build_sft_from_pairs(const std::vector<TextPair>& pairs, const Matcher& offensive,
                               const SftOptions& options, const TemplateConfig& config);

void to_json(nlohmann::json& j, const InstructionSample& s);
std::string serialize_samples(const std::vector<InstructionSample>& samples);
void save_samples(const std::vector<InstructionSample>& samples, const std::filesystem::path& path);
/// Loads an export and checks every sample against the template config.
std::vector<InstructionSample> load_samples(const std::filesystem::path& path,
                                            const TemplateConfig& config);

}  // namespace pclkit
