#include "pclkit/pipeline.hpp"

#include <cstdlib>
#include <functional>
#include <memory>

#include "pclkit/clean.hpp"
#include "pclkit/hash.hpp"
#include "pclkit/io.hpp"
#include "pclkit/toxicity.hpp"

namespace pclkit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 7> kStageNames = {
    "lexicon", "clean", "pt-filter", "score", "sft-build", "eval", "all"};

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError("unknown config key '" + where + "." + key + "'");
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

fs::path input_path(const json& j, const char* key, const fs::path& base, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw ValidationError("config key '" + where + "." + key + "' must name a file");
  }
  fs::path p = it->get<std::string>();
  p = p.is_absolute() ? p : base / p;
  if (!fs::is_regular_file(p)) {
    throw ValidationError("config key '" + where + "." + key + "' names a missing file: " + p.string());
  }
  return p;
}

std::uint64_t require_seed(const json& seeds, const char* key) {
  auto it = seeds.find(key);
  if (it == seeds.end() || !it->is_number_unsigned()) {
    throw ValidationError(std::string("seeds.") + key + " must be an explicit non-negative integer");
  }
  return it->get<std::uint64_t>();
}

// Tracks checksums of what a stage read and wrote.
class Run {
 public:
  explicit Run(const PipelineConfig& config) : config_(config) {}

  fs::path out(std::string_view rel) const { return config_.output_dir / fs::path(rel); }

  fs::path need(std::string_view rel, std::string_view producer) {
    auto p = out(rel);
    if (!fs::is_regular_file(p)) {
      throw ValidationError("missing prerequisite artifact '" + std::string(rel) +
                            "'; run the '" + std::string(producer) + "' stage first");
    }
    outputs_or_inputs(rel, p);
    return p;
  }

  const fs::path& input(const fs::path& p) {
    auto rel = p.lexically_relative(config_.base_dir);
    inputs_[(rel.empty() ? p : rel).generic_string()] = sha256_hex(read_file(p));
    return p;
  }

  void write(std::string_view rel, const std::string& bytes) {
    write_file_atomic(out(rel), bytes);
    outputs_[std::string(rel)] = sha256_hex(bytes);
  }

  void write_json(std::string_view rel, const json& j) { write(rel, j.dump(2) + "\n"); }

  json manifest(std::string_view stage, json summary) const {
    return json{{"stage", stage},
                {"config_sha256", config_.config_hash},
                {"seeds", {{"filter", config_.filter_seed}, {"interference", config_.interference_seed}}},
                {"inputs", inputs_},
                {"outputs", outputs_},
                {"summary", std::move(summary)}};
  }

 private:
  // Artifacts produced by earlier stages count as inputs of this one.
  void outputs_or_inputs(std::string_view rel, const fs::path& p) {
    inputs_["output:" + std::string(rel)] = sha256_hex(read_file(p));
  }

  const PipelineConfig& config_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
};

MatcherSet load_matchers(Run& run, const PipelineConfig& config) {
  MatcherSet matchers;
  for (const auto& [lang, source] : config.lexicons) {
    auto path = run.need(lexicon_artifact(lang), "lexicon");
    matchers[lang] = std::make_shared<const Matcher>(load_lexicon(path, lang));
  }
  return matchers;
}

const Matcher& matcher_for(const MatcherSet& matchers, const Document& doc) {
  auto it = matchers.find(doc.language);
  if (it == matchers.end()) {
    throw ValidationError("no lexicon configured for language " +
                          std::string(to_string(doc.language)) + " (document '" + doc.id + "')");
  }
  return *it->second;
}

TemplateConfig template_for(Run& run, const PipelineConfig& config) {
  if (!config.template_config) return default_template_config();
  return load_template_config(run.input(*config.template_config));
}

json stage_lexicon(Run& run, const PipelineConfig& config) {
  json summary = json::object();
  for (const auto& [lang, source] : config.lexicons) {
    auto lexicon = calibrate(lang, load_raw_terms(run.input(source.raw)),
                             load_decisions(run.input(source.decisions)));
    run.write(lexicon_artifact(lang), serialize_lexicon(lexicon));
    summary[std::string(to_string(lang))] = {{"terms", lexicon.entries.size()},
                                             {"relevant", lexicon.relevant_count()}};
  }
  return summary;
}

json stage_clean(Run& run, const PipelineConfig& config) {
  auto cleaning = load_cleaning_config(run.input(config.cleaning_config));
  auto result = clean_pipeline(load_documents(run.input(config.raw_corpus)), cleaning);
  run.write(artifacts::kCleanCorpus, serialize_documents(result.docs));
  run.write_json(artifacts::kCleanReport, result.report);
  return result.report;
}

json stage_filter(Run& run, const PipelineConfig& config) {
  auto matchers = load_matchers(run, config);
  auto docs = load_documents(run.need(artifacts::kCleanCorpus, "clean"));
  auto result = filter_pretrain_corpus(docs, matchers, config.keep_prob, config.filter_seed);
  run.write(artifacts::kPtCorpus, serialize_documents(result.retained));
  run.write_json(artifacts::kPtStats, result.stats);
  return result.stats;
}

json stage_score(Run& run, const PipelineConfig& config) {
  auto matchers = load_matchers(run, config);
  auto docs = load_documents(run.input(config.docs));
  std::vector<ToxicityScore> scores;
  std::size_t external_failures = 0;
  if (config.external_scoring) {
    ExternalScorerConfig ext;
    ext.endpoint = config.endpoint;
    ext.requests_per_second = config.requests_per_second;
    ext.score_field = config.score_field;
    if (!config.credential_env.empty()) {
      const char* key = std::getenv(config.credential_env.c_str());
      if (!key) throw IoError("environment variable " + config.credential_env + " is not set");
      ext.credential = key;
    }
    ext.validate();
    std::vector<ScoringInput> inputs;
    for (const auto& d : docs) inputs.push_back({d.id, d.text});
    fs::create_directories(run.out("score"));
    ScoreCache cache(run.out("score/cache.tsv"));
    auto outcomes = score_external(inputs, ext, cache);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (outcomes[i].score) {
        scores.push_back(*outcomes[i].score);
      } else {
        ++external_failures;
        scores.push_back(score_fallback(docs[i].id, docs[i].text, matcher_for(matchers, docs[i])));
      }
    }
  } else {
    for (const auto& d : docs) scores.push_back(score_fallback(d.id, d.text, matcher_for(matchers, d)));
  }
  std::vector<double> values;
  for (const auto& s : scores) values.push_back(s.score);
  auto stats = values.empty() ? DistributionStats{} : distribution_stats(values);
  run.write(artifacts::kScores, serialize_scores(scores));
  run.write_json(artifacts::kScoreStats, stats);
  json summary = stats;
  summary["external_failures"] = external_failures;
  return summary;
}

json stage_sft(Run& run, const PipelineConfig& config) {
  if (config.dataset == SftDataset::TD) {
    throw ValidationError("the pipeline builds DPM or CPCL samples; TD pairs go through sft-build --pairs");
  }
  auto tmpl = template_for(run, config);
  SftOptions options;
  options.dataset = config.dataset;
  options.with_intensity = config.with_intensity;
  if (config.with_intensity) options.scores = load_scores(run.need(artifacts::kScores, "score"));
  auto result = build_sft_from_labels(load_documents(run.input(config.docs)),
                                      load_labels(run.input(config.labels)), options, tmpl);
  if (!result.report.conserved()) throw Error("sample accounting does not balance");
  run.write(artifacts::kSftSamples, serialize_samples(result.samples));
  run.write_json(artifacts::kSftReport, result.report);
  run.write_json(artifacts::kTraining, config.training);
  return result.report;
}

json stage_eval(Run& run, const PipelineConfig& config) {
  auto docs = load_documents(run.input(config.docs));
  auto finals = resolve_final_labels(load_labels(run.input(config.labels)));
  std::vector<Document> items;
  bool has_test = std::any_of(docs.begin(), docs.end(), [](const Document& d) { return d.split == Split::TEST; });
  for (const auto& d : docs) {
    if ((!has_test || d.split == Split::TEST) && finals.contains(d.id)) items.push_back(d);
  }
  if (items.empty()) throw ValidationError("no labeled documents to evaluate");

  std::vector<RawPrediction> preds;
  if (config.predictions) {
    preds = load_predictions(run.input(*config.predictions));
  } else {
    auto matchers = load_matchers(run, config);
    auto tmpl = template_for(run, config);
    std::string bytes;
    for (const auto& d : items) {
      RawPrediction p{d.id, lexicon_classifier_output(d, matcher_for(matchers, d), tmpl), std::nullopt};
      bytes += json(p).dump() + "\n";
      preds.push_back(std::move(p));
    }
    run.write(artifacts::kPredictions, bytes);
  }
  auto mapped = map_predictions(preds, docs, default_mapping_config());
  EvalOptions options{config.policy, config.by_group, config.by_subcategory};
  auto report = evaluate(items, finals, mapped, options);
  run.write(artifacts::kEvalSummary, eval_summary(report));
  run.write(artifacts::kEvalReport, render_report(report));
  json summary = {{"macro_f1", report.overall.macro.f1}, {"items", items.size()}};
  const bool any_flagged = std::any_of(items.begin(), items.end(), [](const Document& d) { return d.interference; });
  if (config.interference && any_flagged) {
    auto exp = interference_experiment(items, finals, mapped, config.few_fraction,
                                       config.interference_seed, config.policy);
    run.write_json(artifacts::kInterference, exp);
    summary["interference"] = {{"few_vs_none", exp.delta_few_vs_none},
                               {"all_vs_none", exp.delta_all_vs_none},
                               {"all_vs_few", exp.delta_all_vs_few}};
  }
  return summary;
}

using StageFn = json (*)(Run&, const PipelineConfig&);

StageFn stage_fn(PipelineStage stage) {
  switch (stage) {
    case PipelineStage::LEXICON: return stage_lexicon;
    case PipelineStage::CLEAN: return stage_clean;
    case PipelineStage::PT_FILTER: return stage_filter;
    case PipelineStage::SCORE: return stage_score;
    case PipelineStage::SFT_BUILD: return stage_sft;
    case PipelineStage::EVAL: return stage_eval;
    case PipelineStage::ALL: break;
  }
  throw ValidationError("stage 'all' has no single implementation");
}

}  // namespace

std::string_view stage_name(PipelineStage stage) { return kStageNames[static_cast<std::size_t>(stage)]; }

PipelineStage parse_stage(std::string_view name) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (kStageNames[i] == name) return static_cast<PipelineStage>(i);
  }
  throw ValidationError("unknown stage '" + std::string(name) + "'");
}

std::string lexicon_artifact(Language language) {
  return std::string(artifacts::kLexiconPrefix) + std::string(to_string(language)) + ".tsv";
}

PipelineConfig pipeline_config_from_json(const json& j, const fs::path& base) {
  PipelineConfig c;
  c.base_dir = base;
  try {
    reject_unknown(j, {"output_dir", "seeds", "lexicons", "cleaning", "filter", "scoring", "sft", "eval", "training"}, "config");
    if (!j.contains("output_dir")) throw ValidationError("config key 'output_dir' is required");
    fs::path out = j.at("output_dir").get<std::string>();
    c.output_dir = out.is_absolute() ? out : base / out;

    const json& seeds = j.contains("seeds") ? j.at("seeds") : json::object();
    reject_unknown(seeds, {"filter", "interference"}, "seeds");
    c.filter_seed = require_seed(seeds, "filter");
    c.interference_seed = require_seed(seeds, "interference");

    if (!j.contains("lexicons")) throw ValidationError("config key 'lexicons' is required");
    reject_unknown(j.at("lexicons"), {"EN", "ZH"}, "lexicons");
    for (const auto& [lang, src] : j.at("lexicons").items()) {
      const std::string where = "lexicons." + lang;
      reject_unknown(src, {"raw", "decisions"}, where);
      c.lexicons[parse_enum<Language>(lang)] = {input_path(src, "raw", base, where),
                                                input_path(src, "decisions", base, where)};
    }

    const json cleaning = j.value("cleaning", json::object());
    reject_unknown(cleaning, {"config", "corpus"}, "cleaning");
    c.cleaning_config = input_path(cleaning, "config", base, "cleaning");
    c.raw_corpus = input_path(cleaning, "corpus", base, "cleaning");

    const json filter = j.value("filter", json::object());
    reject_unknown(filter, {"keep_prob"}, "filter");
    c.keep_prob = get_or(filter, "keep_prob", kDefaultKeepProb);
    if (!(c.keep_prob >= 0.0 && c.keep_prob <= 1.0)) throw ValidationError("filter.keep_prob must be in [0, 1]");

    const json scoring = j.value("scoring", json::object());
    reject_unknown(scoring, {"mode", "endpoint", "credential_env", "requests_per_second", "score_field"}, "scoring");
    const auto mode = get_or<std::string>(scoring, "mode", "fallback");
    if (mode != "fallback" && mode != "external") throw ValidationError("scoring.mode must be fallback or external");
    c.external_scoring = mode == "external";
    c.endpoint = get_or<std::string>(scoring, "endpoint", "");
    c.credential_env = get_or<std::string>(scoring, "credential_env", "");
    c.requests_per_second = get_or(scoring, "requests_per_second", 1.0);
    c.score_field = get_or<std::string>(scoring, "score_field", "score");
    if (c.external_scoring && c.endpoint.empty()) throw ValidationError("scoring.endpoint is required in external mode");

    const json sft = j.value("sft", json::object());
    reject_unknown(sft, {"docs", "labels", "template", "dataset", "with_intensity"}, "sft");
    c.docs = input_path(sft, "docs", base, "sft");
    c.labels = input_path(sft, "labels", base, "sft");
    if (sft.contains("template") && !sft.at("template").is_null()) c.template_config = input_path(sft, "template", base, "sft");
    c.dataset = parse_enum<SftDataset>(get_or<std::string>(sft, "dataset", "CPCL"));
    c.with_intensity = get_or(sft, "with_intensity", true);

    const json ev = j.value("eval", json::object());
    reject_unknown(ev, {"predictions", "policy", "by_group", "by_subcategory", "interference", "few_fraction"}, "eval");
    if (ev.contains("predictions") && !ev.at("predictions").is_null()) c.predictions = input_path(ev, "predictions", base, "eval");
    c.policy = parse_enum<UnknownPolicy>(get_or<std::string>(ev, "policy", "COUNT_AS_WRONG"));
    c.by_group = get_or(ev, "by_group", true);
    c.by_subcategory = get_or(ev, "by_subcategory", true);
    c.interference = get_or(ev, "interference", true);
    c.few_fraction = get_or(ev, "few_fraction", kDefaultFewFraction);

    c.training = j.value("training", json::object());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("pipeline config: ") + e.what());
  }
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  const std::string bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  auto config = pipeline_config_from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
  config.config_hash = sha256_hex(bytes);
  return config;
}

std::string lexicon_classifier_output(const Document& doc, const Matcher& matcher,
                                      const TemplateConfig& config) {
  const auto& tmpl = config.language(doc.language);
  return matcher.contains_any(doc.text) ? tmpl.positive_token : tmpl.negative_token;
}

json run_stage(const PipelineConfig& config, PipelineStage stage) {
  if (stage == PipelineStage::ALL) {
    json stages = json::array();
    for (auto s : {PipelineStage::LEXICON, PipelineStage::CLEAN, PipelineStage::PT_FILTER,
                   PipelineStage::SCORE, PipelineStage::SFT_BUILD, PipelineStage::EVAL}) {
      stages.push_back(run_stage(config, s));
    }
    json manifest = {{"stage", "all"}, {"config_sha256", config.config_hash}, {"stages", stages}};
    write_file_atomic(config.output_dir / fs::path(artifacts::kRunManifest), manifest.dump(2) + "\n");
    return manifest;
  }
  fs::create_directories(config.output_dir);
  Run run(config);
  auto summary = stage_fn(stage)(run, config);
  auto manifest = run.manifest(stage_name(stage), std::move(summary));
  write_file_atomic(config.output_dir / "manifests" / (std::string(stage_name(stage)) + ".json"),
                    manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace pclkit
