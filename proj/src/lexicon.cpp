#include "pclkit/lexicon.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <tuple>
#include <unordered_map>

#include "pclkit/hash.hpp"
#include "pclkit/io.hpp"
#include "pclkit/utf8.hpp"

namespace pclkit {

namespace {

std::string term_key(Language language, std::string_view term) {
  return language == Language::EN ? utf8::fold_case(term) : std::string(term);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

double parse_confidence(std::string_view text) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError("confidence '" + std::string(text) + "' is not a number");
  }
  return value;
}

bool parse_flag(std::string_view text) {
  if (text == "1" || text == "true" || text == "TRUE") return true;
  if (text == "0" || text == "false" || text == "FALSE") return false;
  throw ValidationError("relevance flag '" + std::string(text) + "' must be 1/0 or true/false");
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename Fn>
void read_tsv(const std::filesystem::path& path, std::size_t min_fields, Fn&& fn) {
  for_each_line(path, [&](std::string_view line, std::size_t number) {
    if (utf8::trim(line).empty()) return;
    auto fields = split_tabs(line);
    if (fields.size() < min_fields) {
      throw ParseError(path.string(), number,
                       "expected " + std::to_string(min_fields) + " tab-separated fields");
    }
    try {
      fn(fields);
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), number, e.what());
    }
  });
}

// Offset of the code point that ends right before `pos`.
std::size_t previous_cp_start(std::string_view text, std::size_t pos) {
  std::size_t start = pos - 1;
  while (start > 0 && (static_cast<unsigned char>(text[start]) & 0xC0) == 0x80) --start;
  return start;
}

}  // namespace

std::size_t Lexicon::relevant_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.relevant; }));
}

void Lexicon::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (utf8::trim(e.term).empty()) throw ValidationError("lexicon term must be non-empty");
    if (!utf8::is_valid(e.term)) throw ValidationError("lexicon term is not valid UTF-8");
    if (!(e.confidence >= 0.0 && e.confidence <= 1.0)) {
      throw ValidationError("confidence of '" + e.term + "' outside [0, 1]");
    }
    if (!seen.insert(term_key(language, e.term)).second) {
      throw ValidationError("duplicate lexicon term '" + e.term + "'");
    }
  }
}

Lexicon calibrate(Language language, const std::vector<RawTerm>& raw,
                  const std::vector<RelevanceDecision>& decisions) {
  Lexicon lexicon;
  lexicon.language = language;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : raw) {
    lexicon.entries.push_back({r.term, r.confidence, false});
    index.emplace(term_key(language, r.term), lexicon.entries.size() - 1);
  }
  lexicon.validate();
  for (const auto& d : decisions) {
    auto it = index.find(term_key(language, d.term));
    if (it == index.end()) {
      throw ValidationError("decision for unknown term '" + d.term + "'");
    }
    lexicon.entries[it->second].relevant = d.relevant;
  }
  return lexicon;
}

Lexicon load_lexicon(const std::filesystem::path& path, Language language) {
  Lexicon lexicon;
  lexicon.language = language;
  read_tsv(path, 3, [&](const std::vector<std::string_view>& f) {
    lexicon.entries.push_back({std::string(f[0]), parse_confidence(f[1]), parse_flag(f[2])});
  });
  lexicon.validate();
  return lexicon;
}

std::string serialize_lexicon(const Lexicon& lexicon) {
  lexicon.validate();
  std::string out;
  for (const auto& e : lexicon.entries) {
    out += e.term + "\t" + format_double(e.confidence) + "\t" + (e.relevant ? "1" : "0") + "\n";
  }
  return out;
}

void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_lexicon(lexicon));
}

std::vector<RawTerm> load_raw_terms(const std::filesystem::path& path) {
  std::vector<RawTerm> out;
  read_tsv(path, 2, [&](const std::vector<std::string_view>& f) {
    out.push_back({std::string(f[0]), parse_confidence(f[1])});
  });
  return out;
}

std::vector<RelevanceDecision> load_decisions(const std::filesystem::path& path) {
  std::vector<RelevanceDecision> out;
  read_tsv(path, 2, [&](const std::vector<std::string_view>& f) {
    out.push_back({std::string(f[0]), parse_flag(f[1])});
  });
  return out;
}

Matcher::Matcher(const Lexicon& lexicon) : language_(lexicon.language) {
  lexicon.validate();
  for (const auto& e : lexicon.entries) {
    if (!e.relevant) continue;
    Term t{e.term, e.confidence, false, false};
    std::string pattern = term_key(language_, e.term);
    if (language_ == Language::EN) {
      const auto cps = utf8::decode(pattern);
      t.word_start = utf8::is_alnum(cps.front().value);
      t.word_end = utf8::is_alnum(cps.back().value);
    }
    automaton_.add(pattern);
    terms_.push_back(std::move(t));
  }
  automaton_.build();
}

template <typename Fn>
void Matcher::for_each_hit(std::string_view text, Fn&& fn) const {
  if (terms_.empty()) return;
  if (language_ == Language::ZH) {
    automaton_.scan(text, [&](const AhoCorasick::Hit& h) { fn(h.pattern, h.begin, h.end); });
    return;
  }

  // Fold the text and keep a map from folded byte offsets back to the
  // original ones; folding can change the encoded length of a code point.
  std::string folded;
  std::vector<std::size_t> origin;
  folded.reserve(text.size());
  origin.reserve(text.size() + 1);
  for (std::size_t pos = 0; pos < text.size();) {
    const auto cp = utf8::decode_at(text, pos);
    const std::size_t before = folded.size();
    utf8::append(folded, utf8::fold_case(cp.value));
    origin.insert(origin.end(), folded.size() - before, cp.begin);
    pos = cp.end;
  }
  origin.push_back(text.size());

  automaton_.scan(folded, [&](const AhoCorasick::Hit& h) {
    const std::size_t begin = origin[h.begin];
    const std::size_t end = origin[h.end];
    const Term& term = terms_[h.pattern];
    if (term.word_start && begin > 0 &&
        utf8::is_alnum(utf8::decode_at(text, previous_cp_start(text, begin)).value)) {
      return;
    }
    if (term.word_end && end < text.size() && utf8::is_alnum(utf8::decode_at(text, end).value)) {
      return;
    }
    fn(h.pattern, begin, end);
  });
}

std::vector<TermMatch> Matcher::match(std::string_view text) const {
  struct Raw {
    std::size_t begin, end, pattern;
  };
  std::vector<Raw> raw;
  for_each_hit(text, [&](std::size_t p, std::size_t b, std::size_t e) { raw.push_back({b, e, p}); });
  std::sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
    return std::tie(a.begin, a.end, a.pattern) < std::tie(b.begin, b.end, b.pattern);
  });
  std::vector<TermMatch> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back({terms_[r.pattern].text, r.begin, r.end});
  return out;
}

bool Matcher::contains_any(std::string_view text) const {
  bool found = false;
  for_each_hit(text, [&](std::size_t, std::size_t, std::size_t) { found = true; });
  return found;
}

double Matcher::matched_confidence(std::string_view text) const {
  double sum = 0.0;
  for_each_hit(text, [&](std::size_t p, std::size_t, std::size_t) { sum += terms_[p].confidence; });
  return sum;
}

std::vector<TermMatch> match_terms(std::string_view text, const Lexicon& lexicon) {
  return Matcher(lexicon).match(text);
}

void to_json(nlohmann::json& j, const FilterStats& s) {
  j = nlohmann::json{{"input_count", s.input_count},
                     {"matched_count", s.matched_count},
                     {"nonmatched_count", s.nonmatched_count},
                     {"retained_nonmatched_count", s.retained_nonmatched_count},
                     {"output_count", s.output_count},
                     {"keep_prob", s.keep_prob},
                     {"seed", s.seed}};
}

bool keep_nonmatching(std::string_view doc_id, double keep_prob, std::uint64_t seed) {
  return keyed_uniform(seed, doc_id) < keep_prob;
}

FilterResult filter_pretrain_corpus(const std::vector<Document>& docs, const MatcherSet& matchers,
                                    double keep_prob, std::uint64_t seed) {
  if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) {
    throw ValidationError("keep_prob must be in [0, 1]");
  }
  FilterResult result;
  result.stats.keep_prob = keep_prob;
  result.stats.seed = seed;
  for (const auto& doc : docs) {
    ++result.stats.input_count;
    auto it = matchers.find(doc.language);
    const bool matched = it != matchers.end() && it->second && it->second->contains_any(doc.text);
    if (matched) {
      ++result.stats.matched_count;
      result.retained.push_back(doc);
    } else {
      ++result.stats.nonmatched_count;
      if (keep_nonmatching(doc.id, keep_prob, seed)) {
        ++result.stats.retained_nonmatched_count;
        result.retained.push_back(doc);
      }
    }
  }
  result.stats.output_count = result.retained.size();
  return result;
}

FilterResult filter_pretrain_corpus(const std::vector<Document>& docs, const Lexicon& lexicon,
                                    double keep_prob, std::uint64_t seed) {
  MatcherSet set{{lexicon.language, std::make_shared<const Matcher>(lexicon)}};
  return filter_pretrain_corpus(docs, set, keep_prob, seed);
}

}  // namespace pclkit
