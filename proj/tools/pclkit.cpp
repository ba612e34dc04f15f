// pclkit command line: one subcommand per pipeline stage plus annotation
// sessions and the HTTP service. Exit status 0 ok, 1 invalid input, 2 IO.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <memory>

#include "pclkit/annotation.hpp"
#include "pclkit/clean.hpp"
#include "pclkit/corpus.hpp"
#include "pclkit/eval.hpp"
#include "pclkit/instruct.hpp"
#include "pclkit/io.hpp"
#include "pclkit/lexicon.hpp"
#include "pclkit/pipeline.hpp"
#include "pclkit/service.hpp"
#include "pclkit/toxicity.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pclkit;

namespace {

// "EN=path" pairs from --lexicon.
MatcherSet parse_lexicons(const std::vector<std::string>& specs) {
  MatcherSet out;
  for (const auto& spec : specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) throw ValidationError("--lexicon expects LANG=path, got '" + spec + "'");
    auto lang = parse_enum<Language>(spec.substr(0, eq));
    if (out.contains(lang)) throw ValidationError("--lexicon given twice for " + spec.substr(0, eq));
    out[lang] = std::make_shared<const Matcher>(load_lexicon(spec.substr(eq + 1), lang));
  }
  return out;
}

const Matcher& matcher_for(const MatcherSet& set, const Document& doc) {
  auto it = set.find(doc.language);
  if (it == set.end()) {
    throw ValidationError("no --lexicon for language " + std::string(to_string(doc.language)));
  }
  return *it->second;
}

void write_json(const std::string& path, const json& j) {
  if (!path.empty()) write_file_atomic(path, j.dump(2) + "\n");
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    auto item = s.substr(start, comma - start);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilingual PCL data engineering and evaluation toolkit"};
  app.require_subcommand(1);
  std::function<void()> action;

  // lexicon -------------------------------------------------------------
  auto* lexicon = app.add_subcommand("lexicon", "Calibrate a dictionary or match it against text");
  lexicon->require_subcommand(1);
  struct {
    std::string raw, decisions, lang = "EN", out, lexicon, in, text;
  } lx;
  auto* calib = lexicon->add_subcommand("calibrate", "Apply relevance decisions to raw terms");
  calib->add_option("--raw", lx.raw, "term<TAB>confidence file")->required();
  calib->add_option("--decisions", lx.decisions, "term<TAB>1|0 file")->required();
  calib->add_option("--lang", lx.lang, "EN or ZH");
  calib->add_option("--out", lx.out, "Calibrated lexicon TSV")->required();
  calib->callback([&] {
    action = [&] {
      auto lexicon = calibrate(parse_enum<Language>(lx.lang), load_raw_terms(lx.raw),
                               load_decisions(lx.decisions));
      save_lexicon(lexicon, lx.out);
      std::cout << lexicon.entries.size() << " terms, " << lexicon.relevant_count() << " relevant\n";
    };
  });
  auto* match = lexicon->add_subcommand("match", "Report term spans (byte offsets)");
  match->add_option("--lexicon", lx.lexicon, "Calibrated lexicon TSV")->required();
  match->add_option("--lang", lx.lang, "EN or ZH");
  auto* match_src = match->add_option_group("source");
  match_src->add_option("--text", lx.text, "A single text");
  match_src->add_option("--in", lx.in, "Documents JSONL");
  match_src->require_option(1);
  match->add_option("--out", lx.out, "Output JSONL (default stdout)");
  match->callback([&] {
    action = [&] {
      Matcher matcher(load_lexicon(lx.lexicon, parse_enum<Language>(lx.lang)));
      auto line = [&](const std::string& id, const std::string& text) {
        json spans = json::array();
        for (const auto& m : matcher.match(text)) {
          spans.push_back({{"term", m.term}, {"begin", m.begin}, {"end", m.end}});
        }
        return json{{"doc_id", id}, {"matches", spans}}.dump() + "\n";
      };
      std::string out;
      if (!lx.in.empty()) {
        for (const auto& d : load_documents(lx.in)) out += line(d.id, d.text);
      } else {
        out = line("", lx.text);
      }
      if (lx.out.empty()) std::cout << out; else write_file_atomic(lx.out, out);
    };
  });

  // clean ---------------------------------------------------------------
  auto* clean = app.add_subcommand("clean", "Strip tags, redact users, convert emoji, dedupe");
  struct { std::string config, in, out, report; } cl;
  clean->add_option("--config", cl.config, "Cleaning config JSON")->required();
  clean->add_option("--in", cl.in, "Raw documents JSONL")->required();
  clean->add_option("--out", cl.out, "Cleaned documents JSONL")->required();
  clean->add_option("--report", cl.report, "Report JSON");
  clean->callback([&] {
    action = [&] {
      auto result = clean_pipeline(load_documents(cl.in), load_cleaning_config(cl.config));
      save_documents(result.docs, cl.out);
      write_json(cl.report, result.report);
      std::cout << json(result.report).dump() << "\n";
    };
  });

  // pt-filter -----------------------------------------------------------
  auto* filter = app.add_subcommand("pt-filter", "Keep dictionary hits plus a seeded sample of the rest");
  struct {
    std::string in, out, stats;
    std::vector<std::string> lexicons;
    double keep_prob = kDefaultKeepProb;
    std::uint64_t seed = 0;
  } pf;
  filter->add_option("--in", pf.in, "Documents JSONL")->required();
  filter->add_option("--out", pf.out, "Retained documents JSONL")->required();
  filter->add_option("--lexicon", pf.lexicons, "LANG=path, repeatable")->required();
  filter->add_option("--keep-prob", pf.keep_prob, "Retention probability of non-matching docs")
      ->check(CLI::Range(0.0, 1.0));
  filter->add_option("--seed", pf.seed, "Sampling seed")->required();
  filter->add_option("--stats", pf.stats, "Statistics JSON");
  filter->callback([&] {
    action = [&] {
      auto result = filter_pretrain_corpus(load_documents(pf.in), parse_lexicons(pf.lexicons),
                                           pf.keep_prob, pf.seed);
      save_documents(result.retained, pf.out);
      write_json(pf.stats, result.stats);
      std::cout << json(result.stats).dump() << "\n";
    };
  });

  // score ---------------------------------------------------------------
  auto* score = app.add_subcommand("score", "Toxicity scores from an external service or the lexicon fallback");
  struct {
    std::string in, out, stats, endpoint, credential_env, score_field = "score", cache;
    std::vector<std::string> lexicons;
    double rps = 1.0;
    std::size_t in_flight = 4;
  } sc;
  score->add_option("--in", sc.in, "Documents JSONL")->required();
  score->add_option("--out", sc.out, "Scores JSONL")->required();
  score->add_option("--stats", sc.stats, "Distribution statistics JSON");
  auto* mode = score->add_option_group("mode");
  mode->add_option("--endpoint", sc.endpoint, "http(s)://host[:port]/path of the scoring service");
  auto* fallback = mode->add_flag("--fallback", "Score with the lexicon fallback");
  mode->require_option(1);
  score->add_option("--lexicon", sc.lexicons, "LANG=path for the fallback");
  score->add_option("--credential-env", sc.credential_env, "Environment variable holding the API key");
  score->add_option("--score-field", sc.score_field, "Dotted path of the score in responses");
  score->add_option("--rps", sc.rps, "Requests per second");
  score->add_option("--max-in-flight", sc.in_flight, "Concurrent requests");
  score->add_option("--cache", sc.cache, "Score cache file");
  score->callback([&] {
    action = [&] {
      auto docs = load_documents(sc.in);
      std::vector<ToxicityScore> scores;
      std::size_t failures = 0;
      if (*fallback) {
        auto matchers = parse_lexicons(sc.lexicons);
        for (const auto& d : docs) scores.push_back(score_fallback(d.id, d.text, matcher_for(matchers, d)));
      } else {
        ExternalScorerConfig cfg;
        cfg.endpoint = sc.endpoint;
        cfg.score_field = sc.score_field;
        cfg.requests_per_second = sc.rps;
        cfg.max_in_flight = sc.in_flight;
        if (!sc.credential_env.empty()) {
          const char* key = std::getenv(sc.credential_env.c_str());
          if (!key) throw IoError("environment variable " + sc.credential_env + " is not set");
          cfg.credential = key;
        }
        cfg.validate();
        std::vector<ScoringInput> inputs;
        for (const auto& d : docs) inputs.push_back({d.id, d.text});
        std::unique_ptr<ScoreCache> cache = sc.cache.empty() ? std::make_unique<ScoreCache>()
                                                             : std::make_unique<ScoreCache>(sc.cache);
        for (const auto& o : score_external(inputs, cfg, *cache)) {
          if (o.score) {
            scores.push_back(*o.score);
          } else {
            ++failures;
            std::cerr << "score failed for " << o.doc_id << ": " << o.error << "\n";
          }
        }
      }
      write_file_atomic(sc.out, serialize_scores(scores));
      std::vector<double> values;
      for (const auto& s : scores) values.push_back(s.score);
      if (!values.empty()) {
        auto stats = distribution_stats(values);
        write_json(sc.stats, stats);
        std::cout << json(stats).dump() << "\n";
      }
      if (failures) throw IoError(std::to_string(failures) + " document(s) could not be scored");
    };
  });

  // sft-build -----------------------------------------------------------
  auto* sft = app.add_subcommand("sft-build", "Instruction samples for DPM, TD or CPCL");
  struct {
    std::string dataset = "cpcl", docs, labels, pairs, offensive, scores, template_path, out, report;
    bool with_intensity = false;
  } sb;
  sft->add_option("--dataset", sb.dataset, "dpm, td or cpcl")
      ->check(CLI::IsMember({"dpm", "td", "cpcl"}, CLI::ignore_case));
  sft->add_option("--docs", sb.docs, "Documents JSONL (dpm, cpcl)");
  sft->add_option("--labels", sb.labels, "Labels JSONL (dpm, cpcl)");
  sft->add_option("--pairs", sb.pairs, "Comment/reply pairs JSONL (td)");
  sft->add_option("--offensive-lexicon", sb.offensive, "Offensive-term TSV (td)");
  sft->add_option("--scores", sb.scores, "Scores JSONL for intensity clauses");
  sft->add_flag("--with-intensity", sb.with_intensity, "Append the intensity clause");
  sft->add_option("--config", sb.template_path, "Template config JSON");
  sft->add_option("--out", sb.out, "Samples JSONL")->required();
  sft->add_option("--report", sb.report, "Report JSON");
  sft->callback([&] {
    action = [&] {
      TemplateConfig tmpl = sb.template_path.empty() ? default_template_config()
                                                     : load_template_config(sb.template_path);
      SftOptions options;
      std::string upper = sb.dataset;
      for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      options.dataset = parse_enum<SftDataset>(upper);
      options.with_intensity = sb.with_intensity;
      if (sb.with_intensity) {
        if (sb.scores.empty()) throw ValidationError("--with-intensity needs --scores");
        options.scores = load_scores(sb.scores);
      }
      SftResult result;
      if (options.dataset == SftDataset::TD) {
        if (sb.pairs.empty() || sb.offensive.empty()) {
          throw ValidationError("td needs --pairs and --offensive-lexicon");
        }
        Matcher offensive(load_lexicon(sb.offensive, Language::EN));
        result = build_sft_from_pairs(load_pairs(sb.pairs), offensive, options, tmpl);
      } else {
        if (sb.docs.empty() || sb.labels.empty()) throw ValidationError("--docs and --labels are required");
        result = build_sft_from_labels(load_documents(sb.docs), load_labels(sb.labels), options, tmpl);
      }
      save_samples(result.samples, sb.out);
      write_json(sb.report, result.report);
      std::cout << json(result.report).dump() << "\n";
    };
  });

  // eval ----------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Macro P/R/F1 with group, subcategory and interference views");
  struct {
    std::string docs, gold, pred, summary, policy = "COUNT_AS_WRONG", interference_out;
    bool by_group = false, by_subcategory = false, interference = false;
    double few_fraction = kDefaultFewFraction;
    std::uint64_t seed = 0;
  } ea;
  ev->add_option("--docs", ea.docs, "Documents JSONL")->required();
  ev->add_option("--gold", ea.gold, "Gold labels JSONL")->required();
  ev->add_option("--pred", ea.pred, "Predictions JSONL")->required();
  ev->add_flag("--by-group", ea.by_group, "Per vulnerable-group breakdown");
  ev->add_flag("--by-subcategory", ea.by_subcategory, "Per subcategory breakdown");
  ev->add_flag("--interference", ea.interference, "Run the S_NONE/S_FEW/S_ALL comparison");
  ev->add_option("--few-fraction", ea.few_fraction, "Share of flagged items in S_FEW");
  ev->add_option("--seed", ea.seed, "Seed for the S_FEW selection");
  ev->add_option("--policy", ea.policy, "COUNT_AS_WRONG or COUNT_AS_NEGATIVE");
  ev->add_option("--summary", ea.summary, "Machine-readable summary JSON");
  ev->add_option("--interference-out", ea.interference_out, "Interference result JSON");
  ev->callback([&] {
    action = [&] {
      auto docs = load_documents(ea.docs);
      auto finals = resolve_final_labels(load_labels(ea.gold));
      auto preds = map_predictions(load_predictions(ea.pred), docs, default_mapping_config());
      std::vector<Document> items;
      for (const auto& d : docs) {
        if (finals.contains(d.id)) items.push_back(d);
      }
      const auto policy = parse_enum<UnknownPolicy>(ea.policy);
      auto report = evaluate(items, finals, preds, {policy, ea.by_group, ea.by_subcategory});
      if (!ea.summary.empty()) write_file_atomic(ea.summary, eval_summary(report));
      std::cout << render_report(report);
      if (ea.interference) {
        auto exp = interference_experiment(items, finals, preds, ea.few_fraction, ea.seed, policy);
        write_json(ea.interference_out, exp);
        std::cout << "S_FEW vs S_NONE " << exp.delta_few_vs_none << "\n"
                  << "S_ALL vs S_NONE " << exp.delta_all_vs_none << "\n"
                  << "S_ALL vs S_FEW  " << exp.delta_all_vs_few << "\n";
      }
    };
  });

  // predict (baseline) ------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "Lexicon baseline: positive answer on any dictionary hit");
  struct { std::string docs, out, template_path; std::vector<std::string> lexicons; } pr;
  predict->add_option("--docs", pr.docs, "Documents JSONL")->required();
  predict->add_option("--lexicon", pr.lexicons, "LANG=path, repeatable")->required();
  predict->add_option("--config", pr.template_path, "Template config JSON");
  predict->add_option("--out", pr.out, "Predictions JSONL")->required();
  predict->callback([&] {
    action = [&] {
      auto matchers = parse_lexicons(pr.lexicons);
      TemplateConfig tmpl = pr.template_path.empty() ? default_template_config()
                                                     : load_template_config(pr.template_path);
      std::string out;
      for (const auto& d : load_documents(pr.docs)) {
        RawPrediction p{d.id, lexicon_classifier_output(d, matcher_for(matchers, d), tmpl), std::nullopt};
        out += json(p).dump() + "\n";
      }
      write_file_atomic(pr.out, out);
    };
  });

  // stats ---------------------------------------------------------------
  auto* stats = app.add_subcommand("stats", "Per-platform, per-group counts and PCL proportions");
  struct { std::string docs, labels; } st;
  stats->add_option("--docs", st.docs, "Documents JSONL")->required();
  stats->add_option("--labels", st.labels, "Labels JSONL")->required();
  stats->callback([&] {
    action = [&] {
      std::cout << compute_platform_stats(load_documents(st.docs), load_labels(st.labels)).render();
    };
  });

  // iaa -----------------------------------------------------------------
  auto* iaa = app.add_subcommand("iaa", "Annotation sessions and agreement reports");
  iaa->require_subcommand(1);
  struct {
    std::string docs, primaries, proofreaders, id, sessions = ".", session, labels, json_out, out;
    std::uint64_t seed = 0;
  } ia;
  auto* create = iaa->add_subcommand("create-session", "Assign each document to two primary annotators");
  create->add_option("--docs", ia.docs, "Documents JSONL")->required();
  create->add_option("--primary", ia.primaries, "Comma-separated primary annotator ids")->required();
  create->add_option("--proofreader", ia.proofreaders, "Comma-separated proofreader ids");
  create->add_option("--id", ia.id, "Session id")->required();
  create->add_option("--sessions", ia.sessions, "Sessions directory");
  create->add_option("--seed", ia.seed, "Assignment seed")->required();
  create->callback([&] {
    action = [&] {
      std::vector<Annotator> annotators;
      for (auto& a : split_csv(ia.primaries)) annotators.push_back({a, AnnotatorRole::PRIMARY});
      for (auto& a : split_csv(ia.proofreaders)) annotators.push_back({a, AnnotatorRole::PROOFREADER});
      auto state = create_session(ia.id, load_documents(ia.docs), annotators, ia.seed);
      auto path = session_path(ia.sessions, ia.id);
      if (fs::exists(path)) throw ValidationError("session file already exists: " + path.string());
      save_session(state, path);
      std::cout << path.string() << "\n";
    };
  });
  auto* report = iaa->add_subcommand("report", "Cohen's kappa: binary, weak-removed, per subcategory");
  auto* report_src = report->add_option_group("source");
  report_src->add_option("--session", ia.session, "Session state file");
  report_src->add_option("--labels", ia.labels, "Labels JSONL with two PRIMARY records per doc");
  report_src->require_option(1);
  report->add_option("--json", ia.json_out, "Write the machine-readable summary here");
  report->callback([&] {
    action = [&] {
      auto pairs = ia.session.empty() ? label_pairs(load_labels(ia.labels))
                                      : label_pairs(load_session(ia.session));
      auto r = compute_iaa(pairs);
      if (!ia.json_out.empty()) write_file_atomic(ia.json_out, iaa_summary(r));
      std::cout << render_iaa(r);
    };
  });
  auto* exp = iaa->add_subcommand("export", "Session labels in the label line format");
  exp->add_option("--session", ia.session, "Session state file")->required();
  exp->add_option("--out", ia.out, "Labels JSONL")->required();
  exp->callback([&] {
    action = [&] { save_labels(export_labels(load_session(ia.session)), ia.out); };
  });

  // serve ---------------------------------------------------------------
  auto* serve_cmd = app.add_subcommand("serve", "Annotation and report HTTP service");
  struct { std::string host = "127.0.0.1", sessions, tokens, runs, static_dir; int port = 8080; std::size_t batch = 50; } sv;
  serve_cmd->add_option("--port", sv.port, "TCP port");
  serve_cmd->add_option("--host", sv.host, "Bind address");
  serve_cmd->add_option("--sessions", sv.sessions, "Sessions directory")->required();
  serve_cmd->add_option("--tokens", sv.tokens, "Token file")->required();
  serve_cmd->add_option("--runs", sv.runs, "Runs directory (default <sessions>/runs)");
  serve_cmd->add_option("--static", sv.static_dir, "UI assets served at /");
  serve_cmd->add_option("--batch-size", sv.batch, "Annotation batch size");
  serve_cmd->callback([&] {
    action = [&] {
      ServiceConfig cfg{sv.sessions, sv.runs, std::nullopt, sv.batch};
      if (!sv.static_dir.empty()) cfg.static_dir = sv.static_dir;
      std::cerr << "listening on " << sv.host << ":" << sv.port << "\n";
      serve(cfg, load_tokens(sv.tokens), sv.host, sv.port);
    };
  });

  // run -----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Run a pipeline stage from a config file");
  struct { std::string stage, config, output_dir; std::optional<std::uint64_t> filter_seed; std::optional<double> keep_prob; } rn;
  run->add_option("stage", rn.stage, "lexicon, clean, pt-filter, score, sft-build, eval or all")->required();
  run->add_option("--config", rn.config, "Pipeline config JSON")->required();
  run->add_option("--output-dir", rn.output_dir, "Override output_dir");
  run->add_option("--seed", rn.filter_seed, "Override seeds.filter");
  run->add_option("--keep-prob", rn.keep_prob, "Override filter.keep_prob");
  run->callback([&] {
    action = [&] {
      auto config = load_pipeline_config(rn.config);
      if (!rn.output_dir.empty()) config.output_dir = rn.output_dir;
      if (rn.filter_seed) config.filter_seed = *rn.filter_seed;
      if (rn.keep_prob) config.keep_prob = *rn.keep_prob;
      auto manifest = run_stage(config, parse_stage(rn.stage));
      std::cout << manifest.dump(2) << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    action();
    return 0;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
