#include <gtest/gtest.h>

#include "pclkit/hash.hpp"
#include "pclkit/io.hpp"
#include "pclkit/pipeline.hpp"
#include "test_support.hpp"

using namespace pclkit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

PipelineConfig mini_config(const fs::path& out) {
  auto c = load_pipeline_config(test::source_path("data/mini/pipeline.json"));
  c.output_dir = out;
  return c;
}

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = sha256_hex(read_file(e.path()));
  return out;
}

json mini_json() { return json::parse(read_file(test::source_path("data/mini/pipeline.json"))); }

}  // namespace

TEST(PipelineConfig, StageNamesRoundTrip) {
  for (auto s : {PipelineStage::LEXICON, PipelineStage::CLEAN, PipelineStage::PT_FILTER, PipelineStage::SCORE,
                 PipelineStage::SFT_BUILD, PipelineStage::EVAL, PipelineStage::ALL})
    EXPECT_EQ(parse_stage(stage_name(s)), s);
  EXPECT_THROW(parse_stage("train"), ValidationError);
}

TEST(PipelineConfig, RejectsUnknownKeysMissingSeedsAndMissingFiles) {
  const auto base = test::source_path("data/mini");
  EXPECT_NO_THROW(pipeline_config_from_json(mini_json(), base));

  auto j = mini_json();
  j["filter"]["keep_probability"] = 0.3;
  EXPECT_THROW(pipeline_config_from_json(j, base), ValidationError);

  j = mini_json();
  j["extra"] = 1;
  EXPECT_THROW(pipeline_config_from_json(j, base), ValidationError);

  j = mini_json();
  j.erase("seeds");
  EXPECT_THROW(pipeline_config_from_json(j, base), ValidationError);

  j = mini_json();
  j["seeds"].erase("interference");
  EXPECT_THROW(pipeline_config_from_json(j, base), ValidationError);

  j = mini_json();
  j["sft"]["docs"] = "absent.jsonl";
  EXPECT_ANY_THROW(pipeline_config_from_json(j, base));

  auto c = pipeline_config_from_json(mini_json(), base);
  EXPECT_EQ(c.filter_seed, 7u);
  EXPECT_EQ(c.docs, base / "docs.jsonl");
  EXPECT_EQ(c.training.at("precision"), "bf16");
}

TEST(Pipeline, MissingPrerequisiteNamesTheStage) {
  test::TempDir dir;
  auto c = mini_config(dir / "out");
  run_stage(c, PipelineStage::LEXICON);
  try {
    run_stage(c, PipelineStage::PT_FILTER);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("missing prerequisite"), std::string::npos) << what;
    EXPECT_NE(what.find("'clean'"), std::string::npos) << what;
  }
}

TEST(Pipeline, StagesChainAndRecordProvenance) {
  test::TempDir dir;
  auto c = mini_config(dir / "out");
  run_stage(c, PipelineStage::LEXICON);
  run_stage(c, PipelineStage::CLEAN);
  auto m = run_stage(c, PipelineStage::PT_FILTER);
  EXPECT_EQ(m.at("stage"), "pt-filter");
  EXPECT_TRUE(m.at("inputs").contains("output:clean/corpus.jsonl"));
  EXPECT_EQ(m.at("outputs").at("pt/corpus.jsonl"),
            sha256_hex(read_file(c.output_dir / artifacts::kPtCorpus)));
  EXPECT_EQ(m.at("config_sha256"), c.config_hash);
  EXPECT_TRUE(fs::exists(c.output_dir / "manifests" / "pt-filter.json"));
}

TEST(Pipeline, FullRunIsReproducibleAndLeavesNoTempFiles) {
  test::TempDir dir;
  auto a = run_stage(mini_config(dir / "a"), PipelineStage::ALL);
  auto b = run_stage(mini_config(dir / "b"), PipelineStage::ALL);
  EXPECT_EQ(a, b);
  auto ha = tree_hashes(dir / "a");
  EXPECT_EQ(ha, tree_hashes(dir / "b"));
  for (const auto& [rel, sha] : ha) EXPECT_EQ(rel.find(".tmp."), std::string::npos) << rel;

  for (auto rel : {artifacts::kCleanCorpus, artifacts::kPtCorpus, artifacts::kScores, artifacts::kSftSamples,
                   artifacts::kEvalSummary, artifacts::kEvalReport, artifacts::kInterference,
                   artifacts::kTraining, artifacts::kRunManifest})
    EXPECT_TRUE(ha.count(std::string(rel))) << rel;

  auto summary = json::parse(read_file(dir / "a" / std::string(artifacts::kEvalSummary)));
  const double f1 = summary.at("overall").at("macro").at("f1");
  EXPECT_GE(f1, 0.0);
  EXPECT_LE(f1, 1.0);
  auto training = json::parse(read_file(dir / "a" / std::string(artifacts::kTraining)));
  EXPECT_EQ(training.at("precision"), "bf16");
}

TEST(Pipeline, SeedChangesFilterOutputOnly) {
  test::TempDir dir;
  auto c = mini_config(dir / "a");
  run_stage(c, PipelineStage::LEXICON);
  run_stage(c, PipelineStage::CLEAN);
  run_stage(c, PipelineStage::PT_FILTER);
  const auto first = read_file(c.output_dir / artifacts::kPtCorpus);
  const auto clean = read_file(c.output_dir / artifacts::kCleanCorpus);
  c.filter_seed = 8;
  run_stage(c, PipelineStage::PT_FILTER);
  EXPECT_NE(read_file(c.output_dir / artifacts::kPtCorpus), first);
  EXPECT_EQ(read_file(c.output_dir / artifacts::kCleanCorpus), clean);
}
