#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "pclkit/eval.hpp"
#include "pclkit/io.hpp"
#include "test_support.hpp"

using namespace pclkit;
namespace fs = std::filesystem;

namespace {

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

std::string mini(const char* name) { return quote(test::source_path(std::string("data/mini/") + name)); }

int run(const std::string& args) {
  const std::string cmd = std::string("'") + PCLKIT_CLI + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  test::TempDir dir;
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_EQ(run("pt-filter --in x"), 1);  // missing required options
  EXPECT_EQ(run("stats --docs " + quote(dir / "absent.jsonl") + " --labels " + mini("labels.jsonl")), 2);
  write_file_atomic(dir / "bad.jsonl", "{\"id\":\"x\"}\n");
  EXPECT_EQ(run("stats --docs " + quote(dir / "bad.jsonl") + " --labels " + mini("labels.jsonl")), 1);
  EXPECT_EQ(run("stats --docs " + mini("docs.jsonl") + " --labels " + mini("labels.jsonl")), 0);
}

TEST(Cli, PtFilterIsDeterministicAndSeedRequired) {
  test::TempDir dir;
  const std::string common = " --in " + mini("raw_posts.jsonl") + " --lexicon EN=" + quote(dir / "en.tsv") +
                             " --keep-prob 0.3";
  ASSERT_EQ(run("lexicon calibrate --raw " + mini("lexicon_en_raw.tsv") + " --decisions " +
                mini("lexicon_en_decisions.tsv") + " --lang EN --out " + quote(dir / "en.tsv")),
            0);
  EXPECT_EQ(run("pt-filter" + common + " --out " + quote(dir / "x.jsonl")), 1);
  ASSERT_EQ(run("pt-filter" + common + " --seed 7 --out " + quote(dir / "a.jsonl")), 0);
  ASSERT_EQ(run("pt-filter" + common + " --seed 7 --out " + quote(dir / "b.jsonl")), 0);
  EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
  EXPECT_FALSE(read_file(dir / "a.jsonl").empty());
}

TEST(Cli, EvalSummaryMatchesLibrary) {
  test::TempDir dir;
  ASSERT_EQ(run("lexicon calibrate --raw " + mini("lexicon_en_raw.tsv") + " --decisions " +
                mini("lexicon_en_decisions.tsv") + " --lang EN --out " + quote(dir / "en.tsv")),
            0);
  ASSERT_EQ(run("lexicon calibrate --raw " + mini("lexicon_zh_raw.tsv") + " --decisions " +
                mini("lexicon_zh_decisions.tsv") + " --lang ZH --out " + quote(dir / "zh.tsv")),
            0);
  // every language in the corpus needs a lexicon
  EXPECT_EQ(run("predict --docs " + mini("docs.jsonl") + " --lexicon EN=" + quote(dir / "en.tsv") + " --out " +
                quote(dir / "pred.jsonl")),
            1);
  ASSERT_EQ(run("predict --docs " + mini("docs.jsonl") + " --lexicon EN=" + quote(dir / "en.tsv") +
                " --lexicon ZH=" + quote(dir / "zh.tsv") + " --out " + quote(dir / "pred.jsonl")),
            0);
  ASSERT_EQ(run("eval --docs " + mini("docs.jsonl") + " --gold " + mini("labels.jsonl") + " --pred " +
                quote(dir / "pred.jsonl") + " --summary " + quote(dir / "summary.json")),
            0);

  auto docs = load_documents(test::source_path("data/mini/docs.jsonl"));
  auto gold = resolve_final_labels(load_labels(test::source_path("data/mini/labels.jsonl")));
  auto mapped = map_predictions(load_predictions(dir / "pred.jsonl"), docs, default_mapping_config());
  std::vector<Document> items;
  for (const auto& d : docs)
    if (gold.count(d.id)) items.push_back(d);
  EXPECT_EQ(read_file(dir / "summary.json"), eval_summary(evaluate(items, gold, mapped, {})));
}

TEST(Cli, RunAllWritesManifest) {
  test::TempDir dir;
  EXPECT_EQ(run("run all --config " + mini("pipeline.json") + " --output-dir " + quote(dir / "out")), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "run_manifest.json"));
  EXPECT_EQ(run("run bogus --config " + mini("pipeline.json")), 1);
}
