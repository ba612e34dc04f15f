#pragma once

// Declarative end-to-end runs: one JSON config names every input, the seeds
// and the output directory; each stage reads the previous stage's artifacts.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pclkit/corpus.hpp"
#include "pclkit/eval.hpp"
#include "pclkit/instruct.hpp"
#include "pclkit/lexicon.hpp"

namespace pclkit {

enum class PipelineStage { LEXICON, CLEAN, PT_FILTER, SCORE, SFT_BUILD, EVAL, ALL };

/// CLI spelling: "lexicon", "clean", "pt-filter", "score", "sft-build",
/// "eval", "all".
std::string_view stage_name(PipelineStage stage);
PipelineStage parse_stage(std::string_view name);

struct LexiconSource {
  std::filesystem::path raw;        // term<TAB>confidence
  std::filesystem::path decisions;  // term<TAB>1|0
};

struct PipelineConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::filesystem::path output_dir;
  std::uint64_t filter_seed = 0;
  std::uint64_t interference_seed = 0;

  std::map<Language, LexiconSource> lexicons;
  std::filesystem::path cleaning_config;
  std::filesystem::path raw_corpus;  // documents to clean and then filter
  double keep_prob = 0.30;

  bool external_scoring = false;
  std::string endpoint;
  std::string credential_env;  // name of the environment variable holding the key
  double requests_per_second = 1.0;
  std::string score_field = "score";

  std::filesystem::path docs;    // labeled documents
  std::filesystem::path labels;
  std::optional<std::filesystem::path> template_config;
  SftDataset dataset = SftDataset::CPCL;
  bool with_intensity = true;

  std::optional<std::filesystem::path> predictions;  // else lexicon classifier
  UnknownPolicy policy = UnknownPolicy::COUNT_AS_WRONG;
  bool by_group = true;
  bool by_subcategory = true;
  bool interference = true;
  double few_fraction = kDefaultFewFraction;

  /// Inert hyperparameters carried for downstream trainers.
  nlohmann::json training;

  /// SHA-256 of the config file bytes.
  std::string config_hash;
};

/// Parses and checks a config: unknown keys are rejected, seeds are
/// mandatory and every referenced input file must exist.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir);

/// Artifact paths, relative to the output directory.
namespace artifacts {
inline constexpr std::string_view kLexiconPrefix = "lexicon/";  // + EN.tsv / ZH.tsv
inline constexpr std::string_view kCleanCorpus = "clean/corpus.jsonl";
inline constexpr std::string_view kCleanReport = "clean/report.json";
inline constexpr std::string_view kPtCorpus = "pt/corpus.jsonl";
inline constexpr std::string_view kPtStats = "pt/stats.json";
inline constexpr std::string_view kScores = "score/scores.jsonl";
inline constexpr std::string_view kScoreStats = "score/distribution.json";
inline constexpr std::string_view kSftSamples = "sft/samples.jsonl";
inline constexpr std::string_view kSftReport = "sft/report.json";
inline constexpr std::string_view kTraining = "sft/training.json";
inline constexpr std::string_view kPredictions = "eval/predictions.jsonl";
inline constexpr std::string_view kEvalSummary = "eval_summary.json";
inline constexpr std::string_view kEvalReport = "eval/report.txt";
inline constexpr std::string_view kInterference = "eval/interference.json";
inline constexpr std::string_view kRunManifest = "run_manifest.json";
}  // namespace artifacts

std::string lexicon_artifact(Language language);

/// Runs one stage (or all in order) and writes `manifests/<stage>.json`.
/// Returns the manifest: config hash, seeds, input and output checksums.
/// Throws ValidationError naming the artifact when a prerequisite is absent.
nlohmann::json run_stage(const PipelineConfig& config, PipelineStage stage);

/// Prediction used by the bundled baseline: the language's positive answer
/// when the text contains any calibrated term, otherwise the negative one.
std::string lexicon_classifier_output(const Document& doc, const Matcher& matcher,
                                      const TemplateConfig& config);

}  // namespace pclkit
