#include "pclkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <set>
#include <unordered_map>

#include "pclkit/hash.hpp"
#include "pclkit/io.hpp"
#include "pclkit/utf8.hpp"

namespace pclkit {

using nlohmann::json;

const MappingConfig& default_mapping_config() {
  static const MappingConfig config{{
      {Language::EN,
       {{"no, not pcl", Mapped::NEGATIVE},
        {"not pcl", Mapped::NEGATIVE},
        {"non-pcl", Mapped::NEGATIVE},
        {"yes, pcl", Mapped::POSITIVE},
        {"pcl", Mapped::POSITIVE}}},
      {Language::ZH,
       {{"否，不属于pcl", Mapped::NEGATIVE},
        {"不属于pcl", Mapped::NEGATIVE},
        {"不属于", Mapped::NEGATIVE},
        {"是，属于pcl", Mapped::POSITIVE},
        {"属于pcl", Mapped::POSITIVE}}},
  }};
  return config;
}

MappingConfig mapping_config_from_json(const json& j) {
  MappingConfig config;
  try {
    for (const auto& [lang, cues] : j.items()) {
      auto& list = config.cues[parse_enum<Language>(lang)];
      for (const auto& c : cues) {
        const Mapped label = parse_enum<Mapped>(c.at("label").get<std::string>());
        if (label == Mapped::UNKNOWN) throw ValidationError("a cue cannot map to UNKNOWN");
        list.push_back({c.at("phrase").get<std::string>(), label});
        if (list.back().phrase.empty()) throw ValidationError("cue phrase must be non-empty");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("mapping config: ") + e.what());
  }
  return config;
}

Mapped map_output(std::string_view raw, Language language, const MappingConfig& config) {
  auto it = config.cues.find(language);
  if (it == config.cues.end()) return Mapped::UNKNOWN;
  const std::string folded = utf8::fold_case(raw);
  for (const auto& cue : it->second) {
    if (folded.find(utf8::fold_case(cue.phrase)) != std::string::npos) return cue.label;
  }
  return Mapped::UNKNOWN;
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  unknown_count += o.unknown_count;
  return *this;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

Prf class_prf(std::size_t hit, std::size_t false_alarm, std::size_t miss) {
  Prf p;
  p.precision = ratio(hit, hit + false_alarm);
  p.recall = ratio(hit, hit + miss);
  p.f1 = (p.precision + p.recall) == 0.0
             ? 0.0
             : 2.0 * p.precision * p.recall / (p.precision + p.recall);
  return p;
}

}  // namespace

namespace {

// Raw confusion plus the counts the metrics use after applying the policy.
struct Tally {
  Confusion confusion;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  void add(bool gold, Mapped pred, UnknownPolicy policy) {
    if (pred == Mapped::UNKNOWN) {
      ++confusion.unknown_count;
      if (policy == UnknownPolicy::COUNT_AS_NEGATIVE) {
        pred = Mapped::NEGATIVE;
      } else {
        pred = gold ? Mapped::NEGATIVE : Mapped::POSITIVE;
      }
    } else if (gold) {
      pred == Mapped::POSITIVE ? ++confusion.tp : ++confusion.fn;
    } else {
      pred == Mapped::POSITIVE ? ++confusion.fp : ++confusion.tn;
    }
    if (gold) {
      pred == Mapped::POSITIVE ? ++tp : ++fn;
    } else {
      pred == Mapped::POSITIVE ? ++fp : ++tn;
    }
  }

  MetricReport report() const {
    MetricReport r;
    r.confusion = confusion;
    r.positive = class_prf(tp, fp, fn);
    r.negative = class_prf(tn, fn, fp);
    r.macro.precision = (r.positive.precision + r.negative.precision) / 2.0;
    r.macro.recall = (r.positive.recall + r.negative.recall) / 2.0;
    r.macro.f1 = (r.positive.f1 + r.negative.f1) / 2.0;

    const std::size_t n = tp + fp + fn + tn;
    const double wp = ratio(tp + fn, n);
    const double wn = ratio(tn + fp, n);
    r.weighted.precision = wp * r.positive.precision + wn * r.negative.precision;
    r.weighted.recall = wp * r.positive.recall + wn * r.negative.recall;
    r.weighted.f1 = wp * r.positive.f1 + wn * r.negative.f1;
    return r;
  }
};

template <typename Key, typename Record, typename KeyFn>
std::map<Key, MetricReport> breakdown(const std::vector<Record>& records, UnknownPolicy policy,
                                      KeyFn key_of) {
  std::map<Key, Tally> slices;
  for (const auto& r : records) slices[key_of(r)].add(r.gold, r.pred, policy);
  std::map<Key, MetricReport> out;
  for (const auto& [key, tally] : slices) out.emplace(key, tally.report());
  return out;
}

}  // namespace

MetricReport macro_prf(std::span<const bool> gold, std::span<const Mapped> pred,
                       UnknownPolicy policy) {
  if (gold.size() != pred.size()) throw ValidationError("gold and predictions differ in length");
  if (gold.empty()) throw ValidationError("cannot score an empty set");
  Tally tally;
  for (std::size_t i = 0; i < gold.size(); ++i) tally.add(gold[i], pred[i], policy);
  return tally.report();
}

MetricReport macro_prf(const std::vector<bool>& gold, const std::vector<Mapped>& pred,
                       UnknownPolicy policy) {
  if (gold.size() != pred.size()) throw ValidationError("gold and predictions differ in length");
  if (gold.empty()) throw ValidationError("cannot score an empty set");
  Tally tally;
  for (std::size_t i = 0; i < gold.size(); ++i) tally.add(gold[i], pred[i], policy);
  return tally.report();
}

std::map<GroupTag, MetricReport> group_breakdown(const std::vector<GroupedRecord>& records,
                                                 UnknownPolicy policy) {
  return breakdown<GroupTag>(records, policy, [](const GroupedRecord& r) { return r.group; });
}

std::map<Subcategory, MetricReport> subcategory_breakdown(
    const std::vector<SubcategoryRecord>& records, UnknownPolicy policy) {
  return breakdown<Subcategory>(records, policy,
                                [](const SubcategoryRecord& r) { return r.subcategory; });
}

std::int64_t percent_tenths(double fraction) { return std::llround(fraction * 1000.0); }

std::int64_t tenths_of(double percent) { return std::llround(percent * 10.0); }

std::string format_delta(double from_percent, double to_percent) {
  const std::int64_t delta = tenths_of(to_percent) - tenths_of(from_percent);
  if (delta == 0) return "0.0";
  return (delta > 0 ? "+" : "") + format_tenths(delta);
}

void to_json(json& j, const RawPrediction& p) {
  j = json{{"doc_id", p.doc_id}, {"raw_output", p.raw_output}};
  if (p.label) j["label"] = *p.label;
}

std::vector<RawPrediction> load_predictions(const std::filesystem::path& path) {
  std::vector<RawPrediction> out;
  std::unordered_map<std::string, std::size_t> seen;
  for_each_line(path, [&](std::string_view line, std::size_t number) {
    if (utf8::trim(line).empty()) return;
    try {
      const json j = json::parse(line);
      RawPrediction p;
      p.doc_id = j.at("doc_id").get<std::string>();
      if (j.contains("raw_output")) p.raw_output = j.at("raw_output").get<std::string>();
      if (j.contains("label")) p.label = j.at("label").get<bool>();
      if (!j.contains("raw_output") && !p.label) {
        throw ValidationError("prediction needs raw_output or label");
      }
      if (auto [it, ok] = seen.emplace(p.doc_id, number); !ok) {
        throw ValidationError("duplicate prediction for '" + p.doc_id + "' (first on line " +
                              std::to_string(it->second) + ")");
      }
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), number, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), number, e.what());
    }
  });
  return out;
}

std::map<std::string, Mapped> map_predictions(const std::vector<RawPrediction>& preds,
                                              const std::vector<Document>& docs,
                                              const MappingConfig& config) {
  std::unordered_map<std::string_view, Language> lang;
  for (const auto& d : docs) lang.emplace(d.id, d.language);
  std::map<std::string, Mapped> out;
  for (const auto& p : preds) {
    Mapped m;
    if (p.label) {
      m = *p.label ? Mapped::POSITIVE : Mapped::NEGATIVE;
    } else {
      auto it = lang.find(p.doc_id);
      m = map_output(p.raw_output, it == lang.end() ? Language::EN : it->second, config);
    }
    out[p.doc_id] = m;
  }
  return out;
}

EvalReport evaluate(const std::vector<Document>& items,
                    const std::map<std::string, LabelRecord>& gold,
                    const std::map<std::string, Mapped>& predictions, const EvalOptions& options) {
  EvalReport report;
  report.policy = options.policy;

  Tally overall;
  std::vector<GroupedRecord> grouped;
  std::vector<SubcategoryRecord> by_sub;
  for (const auto& doc : items) {
    auto g = gold.find(doc.id);
    if (g == gold.end()) throw ValidationError("no gold label for '" + doc.id + "'");
    const LabelRecord& label = g->second;
    auto p = predictions.find(doc.id);
    Mapped pred = Mapped::UNKNOWN;
    if (p == predictions.end()) {
      ++report.missing_predictions;
    } else {
      pred = p->second;
    }
    overall.add(label.pcl, pred, options.policy);

    if (options.by_group) {
      const auto group = label.group ? label.group : doc.group_tag;
      if (group) {
        grouped.push_back({label.pcl, pred, *group});
      } else {
        ++report.ungrouped;
      }
    }
    if (options.by_subcategory) {
      if (label.pcl) {
        for (auto sub : label.subcategories) by_sub.push_back({true, pred, sub});
      } else {
        for (auto sub : all_values<Subcategory>()) by_sub.push_back({false, pred, sub});
      }
    }
  }

  if (items.empty()) throw ValidationError("cannot score an empty set");
  report.overall = overall.report();
  if (options.by_group) report.per_group = group_breakdown(grouped, options.policy);
  if (options.by_subcategory) report.per_subcategory = subcategory_breakdown(by_sub, options.policy);
  return report;
}

void to_json(json& j, const MetricReport& m) {
  auto prf = [](const Prf& p) {
    return json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
  };
  j = json{{"confusion",
            {{"tp", m.confusion.tp},
             {"fp", m.confusion.fp},
             {"fn", m.confusion.fn},
             {"tn", m.confusion.tn},
             {"unknown_count", m.confusion.unknown_count}}},
           {"positive", prf(m.positive)},
           {"negative", prf(m.negative)},
           {"macro", prf(m.macro)},
           {"weighted", prf(m.weighted)}};
}

void to_json(json& j, const EvalReport& r) {
  j = json::object();
  j["policy"] = to_string(r.policy);
  j["scenario"] = r.scenario ? json(to_string(*r.scenario)) : json(nullptr);
  j["n"] = r.overall.confusion.n();
  j["missing_predictions"] = r.missing_predictions;
  j["overall"] = r.overall;
  if (!r.per_group.empty() || r.ungrouped > 0) {
    json groups = json::object();
    for (const auto& [g, m] : r.per_group) groups[std::string(to_string(g))] = m;
    j["per_group"] = std::move(groups);
    j["ungrouped"] = r.ungrouped;
  }
  if (!r.per_subcategory.empty()) {
    json subs = json::object();
    for (const auto& [s, m] : r.per_subcategory) subs[std::string(to_string(s))] = m;
    j["per_subcategory"] = std::move(subs);
  }
}

std::string eval_summary(const EvalReport& report) { return json(report).dump(2) + "\n"; }

namespace {

std::string pct(double v) { return format_tenths(percent_tenths(v)); }

void metric_row(std::ostream& out, const std::string& name, const MetricReport& m) {
  out << std::left << std::setw(20) << name << std::right << std::setw(8) << pct(m.macro.precision)
      << std::setw(8) << pct(m.macro.recall) << std::setw(8) << pct(m.macro.f1) << std::setw(8)
      << m.confusion.n() << "\n";
}

}  // namespace

std::string render_report(const EvalReport& report) {
  std::ostringstream out;
  out << "Evaluation report";
  if (report.scenario) out << " (" << to_string(*report.scenario) << ")";
  out << "\nunknown policy: " << to_string(report.policy) << "\n";
  const auto& c = report.overall.confusion;
  out << "confusion: tp=" << c.tp << " fp=" << c.fp << " fn=" << c.fn << " tn=" << c.tn
      << " unknown=" << c.unknown_count << " missing=" << report.missing_predictions << "\n\n";
  out << std::left << std::setw(20) << "" << std::right << std::setw(8) << "P" << std::setw(8)
      << "R" << std::setw(8) << "F1" << std::setw(8) << "n" << "\n";
  metric_row(out, "macro", report.overall);
  out << std::left << std::setw(20) << "weighted" << std::right << std::setw(8)
      << pct(report.overall.weighted.precision) << std::setw(8)
      << pct(report.overall.weighted.recall) << std::setw(8) << pct(report.overall.weighted.f1)
      << std::setw(8) << c.n() << "\n";
  if (!report.per_group.empty()) {
    out << "\nper group (macro):\n";
    for (const auto& [g, m] : report.per_group) metric_row(out, std::string(to_string(g)), m);
  }
  if (!report.per_subcategory.empty()) {
    out << "\nper subcategory (macro):\n";
    for (const auto& [s, m] : report.per_subcategory) metric_row(out, std::string(to_string(s)), m);
  }
  return out.str();
}

InterferenceResult interference_experiment(const std::vector<Document>& pool,
                                           const std::map<std::string, LabelRecord>& gold,
                                           const std::map<std::string, Mapped>& predictions,
                                           double few_fraction, std::uint64_t seed,
                                           UnknownPolicy policy) {
  if (!(few_fraction > 0.0 && few_fraction <= 1.0)) {
    throw ValidationError("few_fraction must be in (0, 1]");
  }
  std::vector<const Document*> flagged;
  for (const auto& d : pool) {
    if (d.interference) flagged.push_back(&d);
  }
  if (flagged.empty()) throw ValidationError("the pool has no interference samples");

  std::stable_sort(flagged.begin(), flagged.end(), [&](const Document* a, const Document* b) {
    return keyed_uniform(seed, a->id) < keyed_uniform(seed, b->id);
  });
  const auto want = static_cast<std::size_t>(
      std::llround(few_fraction * static_cast<double>(flagged.size())));
  const std::size_t k = std::clamp<std::size_t>(want, 1, flagged.size());
  std::set<std::string_view> chosen;
  for (std::size_t i = 0; i < k; ++i) chosen.insert(flagged[i]->id);

  std::vector<Document> none, few;
  for (const auto& d : pool) {
    if (!d.interference) {
      none.push_back(d);
      few.push_back(d);
    } else if (chosen.contains(d.id)) {
      few.push_back(d);
    }
  }
  if (none.empty()) throw ValidationError("the pool has no regular test samples");

  EvalOptions options;
  options.policy = policy;
  InterferenceResult r;
  r.flagged = flagged.size();
  r.few_selected = k;
  r.none = evaluate(none, gold, predictions, options);
  r.none.scenario = Scenario::S_NONE;
  r.few = evaluate(few, gold, predictions, options);
  r.few.scenario = Scenario::S_FEW;
  r.all = evaluate(pool, gold, predictions, options);
  r.all.scenario = Scenario::S_ALL;

  const double none_pct = r.none.overall.macro.f1 * 100.0;
  const double few_pct = r.few.overall.macro.f1 * 100.0;
  const double all_pct = r.all.overall.macro.f1 * 100.0;
  r.delta_few_vs_none = format_delta(none_pct, few_pct);
  r.delta_all_vs_none = format_delta(none_pct, all_pct);
  r.delta_all_vs_few = format_delta(few_pct, all_pct);
  return r;
}

void to_json(json& j, const InterferenceResult& r) {
  j = json{{"flagged", r.flagged},
           {"few_selected", r.few_selected},
           {"S_NONE", r.none},
           {"S_FEW", r.few},
           {"S_ALL", r.all},
           {"delta_few_vs_none", r.delta_few_vs_none},
           {"delta_all_vs_none", r.delta_all_vs_none},
           {"delta_all_vs_few", r.delta_all_vs_few}};
}

}  // namespace pclkit
