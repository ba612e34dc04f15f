#include "pclkit/toxicity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "pclkit/hash.hpp"
#include "pclkit/io.hpp"
#include "pclkit/utf8.hpp"

namespace pclkit {

using nlohmann::json;

Intensity bucketize(double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw ValidationError("toxicity score " + std::to_string(score) + " outside [0, 1]");
  }
  if (score < kModerateThreshold) return Intensity::MILD;
  if (score < kSevereThreshold) return Intensity::MODERATE;
  return Intensity::SEVERE;
}

ToxicityScore score_fallback(std::string_view doc_id, std::string_view text,
                             const Matcher& matcher) {
  const double raw = matcher.matched_confidence(text) / kFallbackScale;
  return {std::string(doc_id), std::min(1.0, raw), ScoreOrigin::FALLBACK};
}

std::size_t histogram_bin(double score) {
  std::size_t bin = 0;
  while (bin + 1 < kHistogramBins &&
         score >= static_cast<double>(bin + 1) / static_cast<double>(kHistogramBins)) {
    ++bin;
  }
  return bin;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

DistributionStats distribution_stats(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("distribution statistics need at least one score");
  std::vector<double> sorted(scores.begin(), scores.end());
  for (double s : sorted) {
    if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("score outside [0, 1]");
  }
  std::sort(sorted.begin(), sorted.end());

  DistributionStats st;
  st.n = sorted.size();
  st.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(st.n);
  st.median = quantile_sorted(sorted, 0.5);
  st.q1 = quantile_sorted(sorted, 0.25);
  st.q3 = quantile_sorted(sorted, 0.75);
  st.min = sorted.front();
  st.max = sorted.back();
  for (double s : sorted) ++st.histogram[histogram_bin(s)];
  return st;
}

void to_json(json& j, const DistributionStats& s) {
  j = json{{"n", s.n},          {"mean", s.mean}, {"median", s.median},
           {"q1", s.q1},        {"q3", s.q3},     {"min", s.min},
           {"max", s.max},      {"histogram", s.histogram},
           {"bucket_thresholds", {kModerateThreshold, kSevereThreshold}}};
}

ScoreCache::ScoreCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    for_each_line(path_, [&](std::string_view line, std::size_t number) {
      if (line.empty()) return;
      const auto tab = line.find('\t');
      double value = 0.0;
      if (tab == std::string_view::npos ||
          std::from_chars(line.data() + tab + 1, line.data() + line.size(), value).ec !=
              std::errc()) {
        throw ParseError(path_.string(), number, "expected hash<TAB>score");
      }
      entries_[std::string(line.substr(0, tab))] = value;
    });
  }
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw IoError("cannot open score cache " + path_.string());
}

std::string ScoreCache::key(std::string_view text) { return sha256_hex(text); }

std::optional<double> ScoreCache::lookup(std::string_view text) const {
  const std::string k = key(text);
  std::shared_lock lock(mutex_);
  auto it = entries_.find(k);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::store(std::string_view text, double score) {
  const std::string k = key(text);
  std::unique_lock lock(mutex_);
  entries_.insert_or_assign(k, score);
  if (out_.is_open()) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, score);
    out_ << k << '\t' << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << '\n';
    out_.flush();
  }
}

std::size_t ScoreCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

double extract_score(const json& body, std::string_view dotted_path) {
  const json* node = &body;
  std::size_t start = 0;
  while (start <= dotted_path.size()) {
    const auto dot = dotted_path.find('.', start);
    const std::string part(dotted_path.substr(start, dot == std::string_view::npos ? dot : dot - start));
    if (!node->is_object() || !node->contains(part)) {
      throw ValidationError("response has no field '" + std::string(dotted_path) + "'");
    }
    node = &(*node)[part];
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  if (!node->is_number()) {
    throw ValidationError("response field '" + std::string(dotted_path) + "' is not a number");
  }
  const double v = node->get<double>();
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValidationError("response score " + std::to_string(v) + " outside [0, 1]");
  }
  return v;
}

void to_json(json& j, const ToxicityScore& s) {
  j = json{{"doc_id", s.doc_id},
           {"score", s.score},
           {"origin", to_string(s.origin)},
           {"intensity", to_string(bucketize(s.score))}};
}

std::string serialize_scores(const std::vector<ToxicityScore>& scores) {
  std::string out;
  for (const auto& s : scores) {
    out += json(s).dump();
    out.push_back('\n');
  }
  return out;
}

std::map<std::string, double> load_scores(const std::filesystem::path& path) {
  std::map<std::string, double> out;
  for_each_line(path, [&](std::string_view line, std::size_t number) {
    if (utf8::trim(line).empty()) return;
    try {
      const json j = json::parse(line);
      const double score = j.at("score").get<double>();
      if (!(score >= 0.0 && score <= 1.0)) throw ValidationError("score outside [0, 1]");
      if (!out.emplace(j.at("doc_id").get<std::string>(), score).second) {
        throw ValidationError("duplicate doc_id");
      }
    } catch (const json::exception& e) {
      throw ParseError(path.string(), number, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), number, e.what());
    }
  });
  return out;
}

}  // namespace pclkit
