#pragma once

// Toxicity scores in [0, 1]: an HTTP client for an external scoring service
// with a persistent cache, a lexicon-based offline fallback, intensity
// buckets, and distribution statistics.

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pclkit/corpus.hpp"
#include "pclkit/lexicon.hpp"

namespace pclkit {

enum class ScoreOrigin { EXTERNAL, FALLBACK, CACHE };
template <>
struct EnumNames<ScoreOrigin> {
  static constexpr std::string_view kType = "ScoreOrigin";
  static constexpr auto kNames = std::to_array<std::string_view>({"EXTERNAL", "FALLBACK", "CACHE"});
};

struct ToxicityScore {
  std::string doc_id;
  double score = 0.0;
  ScoreOrigin origin = ScoreOrigin::FALLBACK;

  bool operator==(const ToxicityScore&) const = default;
};

/// Lower bounds of MODERATE and SEVERE. Exported alongside bucketed data so
/// consumers can re-bucket.
inline constexpr double kModerateThreshold = 1.0 / 3.0;
inline constexpr double kSevereThreshold = 2.0 / 3.0;

/// MILD below 1/3, MODERATE below 2/3, SEVERE otherwise. Throws for scores
/// outside [0, 1] or NaN.
Intensity bucketize(double score);

/// Scale of the fallback scorer: min(1, sum of matched confidences / K).
inline constexpr double kFallbackScale = 5.0;

ToxicityScore score_fallback(std::string_view doc_id, std::string_view text,
                             const Matcher& matcher);

inline constexpr std::size_t kHistogramBins = 10;

struct DistributionStats {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;  // linear interpolation between order statistics
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
  /// Bin i covers [i/10, (i+1)/10); the last bin also holds 1.0.
  std::array<std::size_t, kHistogramBins> histogram{};
};

DistributionStats distribution_stats(std::span<const double> scores);
std::size_t histogram_bin(double score);
void to_json(nlohmann::json& j, const DistributionStats& s);

/// Persistent text-hash -> score cache, one `sha256<TAB>score` per line.
/// Lookups may run concurrently; inserts are serialized and appended to the
/// file immediately.
class ScoreCache {
 public:
  ScoreCache() = default;  // in-memory only
  explicit ScoreCache(std::filesystem::path path);

  std::optional<double> lookup(std::string_view text) const;
  void store(std::string_view text, double score);
  std::size_t size() const;

  static std::string key(std::string_view text);

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, double> entries_;
  std::ofstream out_;
};

struct ExternalScorerConfig {
  /// http(s)://host[:port]/path
  std::string endpoint;
  /// Sent as "Authorization: Bearer <credential>" when non-empty.
  std::string credential;
  double requests_per_second = 1.0;
  /// Dotted path of the numeric score in the response, e.g.
  /// "attributeScores.TOXICITY.summaryScore.value".
  std::string score_field = "score";
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{200};
  std::chrono::milliseconds timeout{10000};

  void validate() const;
};

struct ScoringInput {
  std::string doc_id;
  std::string text;
};

struct ScoreOutcome {
  std::string doc_id;
  std::optional<ToxicityScore> score;
  std::string error;  // set when score is empty
  int attempts = 0;
};

/// Scores each text, in input order. Cached texts are answered without a
/// request. Network failures, 429 and 5xx answers are retried with
/// exponential backoff up to max_attempts; other failures and malformed
/// answers are recorded per text and the batch continues.
std::vector<ScoreOutcome> score_external(const std::vector<ScoringInput>& inputs,
                                         const ExternalScorerConfig& config, ScoreCache& cache);

/// Extracts the score at a dotted path; throws ValidationError when absent,
/// non-numeric or outside [0, 1].
double extract_score(const nlohmann::json& body, std::string_view dotted_path);

void to_json(nlohmann::json& j, const ToxicityScore& s);

std::string serialize_scores(const std::vector<ToxicityScore>& scores);

/// Score files written by the `score` command: one JSON object per line
/// with doc_id, score, origin and intensity.
std::map<std::string, double> load_scores(const std::filesystem::path& path);

}  // namespace pclkit
