#pragma once

// Condescension lexicon: calibration of a generated term list, multi-pattern
// matching, and lexicon-driven filtering of pre-training corpora.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pclkit/aho_corasick.hpp"
#include "pclkit/corpus.hpp"

namespace pclkit {

struct LexiconEntry {
  std::string term;
  double confidence = 0.0;
  bool relevant = false;

  bool operator==(const LexiconEntry&) const = default;
};

struct Lexicon {
  Language language = Language::EN;
  std::vector<LexiconEntry> entries;

  std::size_t relevant_count() const;
  /// Throws ValidationError on duplicate terms (case-folded for EN), empty
  /// terms or confidence outside [0, 1].
  void validate() const;

  bool operator==(const Lexicon&) const = default;
};

struct RawTerm {
  std::string term;
  double confidence = 0.0;
};

struct RelevanceDecision {
  std::string term;
  bool relevant = false;
};

/// Attaches proofreader decisions to raw terms. Terms without a decision are
/// kept but marked irrelevant. A decision for a term not in `raw` is an error.
Lexicon calibrate(Language language, const std::vector<RawTerm>& raw,
                  const std::vector<RelevanceDecision>& decisions);

/// `term<TAB>confidence<TAB>relevant` per line; relevant is 1/0 or true/false.
Lexicon load_lexicon(const std::filesystem::path& path, Language language);
std::string serialize_lexicon(const Lexicon& lexicon);
void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path);
/// `term<TAB>confidence` per line.
std::vector<RawTerm> load_raw_terms(const std::filesystem::path& path);
/// `term<TAB>relevant` per line.
std::vector<RelevanceDecision> load_decisions(const std::filesystem::path& path);

struct TermMatch {
  std::string term;
  std::size_t begin = 0;  // byte offsets into the original text
  std::size_t end = 0;

  bool operator==(const TermMatch&) const = default;
};

/// Compiled form of the relevant entries of a lexicon.
///
/// EN: simple case folding and word boundaries. An edge of a term that is a
/// letter or digit must not touch another letter or digit in the text.
/// ZH: exact substring.
///
/// Matches are ordered by (begin, end, lexicon order).
class Matcher {
 public:
  explicit Matcher(const Lexicon& lexicon);

  std::vector<TermMatch> match(std::string_view text) const;
  bool contains_any(std::string_view text) const;
  /// Sum of the confidences of all matched occurrences.
  double matched_confidence(std::string_view text) const;

  Language language() const { return language_; }
  bool empty() const { return terms_.empty(); }

 private:
  struct Term {
    std::string text;
    double confidence;
    bool word_start;  // first code point is alphanumeric (EN only)
    bool word_end;
  };

  Language language_;
  std::vector<Term> terms_;
  AhoCorasick automaton_;

  template <typename Fn>
  void for_each_hit(std::string_view text, Fn&& fn) const;
};

/// Convenience wrapper; compile a Matcher once when matching many texts.
std::vector<TermMatch> match_terms(std::string_view text, const Lexicon& lexicon);

inline constexpr double kDefaultKeepProb = 0.30;

struct FilterStats {
  std::size_t input_count = 0;
  std::size_t matched_count = 0;
  std::size_t nonmatched_count = 0;
  std::size_t retained_nonmatched_count = 0;
  std::size_t output_count = 0;
  double keep_prob = kDefaultKeepProb;
  std::uint64_t seed = 0;

  bool consistent() const {
    return output_count == matched_count + retained_nonmatched_count &&
           input_count == matched_count + nonmatched_count;
  }
};

void to_json(nlohmann::json& j, const FilterStats& s);

struct FilterResult {
  std::vector<Document> retained;
  FilterStats stats;
};

using MatcherSet = std::map<Language, std::shared_ptr<const Matcher>>;

/// Keeps every document with at least one relevant term and keeps each other
/// document independently with probability `keep_prob`, drawn from a
/// generator keyed by (seed, document id). Input order is preserved.
/// Documents whose language has no matcher count as non-matching.
FilterResult filter_pretrain_corpus(const std::vector<Document>& docs, const MatcherSet& matchers,
                                    double keep_prob, std::uint64_t seed);
FilterResult filter_pretrain_corpus(const std::vector<Document>& docs, const Lexicon& lexicon,
                                    double keep_prob = kDefaultKeepProb, std::uint64_t seed = 0);

/// Retention predicate for one non-matching document.
bool keep_nonmatching(std::string_view doc_id, double keep_prob, std::uint64_t seed);

}  // namespace pclkit
