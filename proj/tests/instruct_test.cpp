#include <gtest/gtest.h>

#include <random>

#include "pclkit/instruct.hpp"
#include "pclkit/io.hpp"
#include "test_support.hpp"

using namespace pclkit;

namespace {

Document doc(std::string id, std::string text, Language lang = Language::EN) {
  Document d;
  d.id = std::move(id);
  d.text = std::move(text);
  d.language = lang;
  d.split = Split::TRAIN;
  return d;
}

LabelRecord label(std::string doc_id, bool pcl) {
  LabelRecord l;
  l.doc_id = std::move(doc_id);
  l.annotator_id = "a";
  l.pcl = pcl;
  if (pcl) {
    l.subcategories = {Subcategory::COMPASSION};
    l.intensity = Intensity::MODERATE;
  }
  return l;
}

Matcher offensive_matcher() {
  Lexicon lex;
  lex.language = Language::EN;
  lex.entries = {{"idiot", 0.9, true}, {"moron", 0.9, true}};
  return Matcher(lex);
}

}  // namespace

TEST(Templates, DefaultConfigIsValidAndBilingual) {
  const auto& c = default_template_config();
  EXPECT_NO_THROW(c.validate());
  for (auto lang : {Language::EN, Language::ZH}) {
    const auto& t = c.language(lang);
    for (auto sub : all_values<Subcategory>()) {
      EXPECT_NE(t.description_text.find(t.subcategory_names.at(sub)), std::string::npos);
    }
  }
  EXPECT_EQ(c.language(Language::EN).max_input_units, 3500u);
  EXPECT_EQ(c.language(Language::ZH).max_input_units, 7000u);
}

TEST(Templates, JsonRoundTripAndValidation) {
  nlohmann::json j = default_template_config();
  EXPECT_EQ(template_config_from_json(j).languages, default_template_config().languages);
  j["languages"]["EN"]["intensity_clause"] = "no placeholder";
  EXPECT_THROW(template_config_from_json(j), ValidationError);
}

TEST(BuildSample, DescriptionOutputAndIntensityClause) {
  const auto& c = default_template_config();
  auto s = build_sample(doc("d1", "They are so brave."), label("d1", true), Intensity::SEVERE, true, c);
  EXPECT_EQ(s.output, "Yes, PCL");
  EXPECT_EQ(s.input, "They are so brave.");
  EXPECT_EQ(s.instruction.rfind(c.language(Language::EN).description_text, 0), 0u);
  EXPECT_NE(s.instruction.find("\nToxicity intensity of the input text: severe."), std::string::npos);
  EXPECT_EQ(s.meta.intensity, Intensity::SEVERE);
  EXPECT_TRUE(check(s, c).empty());

  auto zh = build_sample(doc("d2", "普通文本", Language::ZH), label("d2", false), std::nullopt, false, c);
  EXPECT_EQ(zh.output, "否，不属于PCL");
  EXPECT_EQ(zh.instruction, c.language(Language::ZH).description_text);
  EXPECT_THROW(build_sample(doc("d3", "x"), label("d3", true), std::nullopt, true, c), ValidationError);
  EXPECT_THROW(build_sample(doc("d3", "x"), label("d4", true), std::nullopt, false, c), ValidationError);
}

TEST(Pairs, ConcatSplitRoundTripAndCollision) {
  const auto& c = default_template_config();
  auto joined = concat_pair("Why?", "Because.", c);
  EXPECT_EQ(joined, "Why? ⟦SEP⟧ Because.");
  EXPECT_EQ(split_pair(joined, c), (std::pair<std::string, std::string>{"Why?", "Because."}));
  EXPECT_THROW(concat_pair("a ⟦SEP⟧ b", "c", c), ValidationError);
  EXPECT_THROW(concat_pair("", "c", c), ValidationError);
}

TEST(Length, DiscardsOverlongInputsByCodePoints) {
  const auto& c = default_template_config();
  auto s = build_sample(doc("d", std::string(3500, 'x')), label("d", false), std::nullopt, false, c);
  EXPECT_TRUE(enforce_length(s, c));
  s.input += "y";
  EXPECT_FALSE(enforce_length(s, c));
  std::string zh;
  for (int i = 0; i < 7000; ++i) zh += "中";  // 21000 bytes, 7000 code points
  auto z = build_sample(doc("z", zh, Language::ZH), label("z", false), std::nullopt, false, c);
  EXPECT_TRUE(enforce_length(z, c));
}

TEST(Dpm, BinarizesAtThreshold) {
  EXPECT_FALSE(binarize_dpm(0));
  EXPECT_FALSE(binarize_dpm(1));
  EXPECT_TRUE(binarize_dpm(2));
  EXPECT_TRUE(binarize_dpm(4));
  EXPECT_THROW(binarize_dpm(5), ValidationError);
}

TEST(SftFromLabels, SkipsTestSplitAndCountsUnlabeled) {
  const auto& c = default_template_config();
  std::vector<Document> docs = {doc("b", "second text"), doc("a", "first text"), doc("t", "held out"),
                                doc("u", "never labeled")};
  docs[2].split = Split::TEST;
  auto r = build_sft_from_labels(docs, {label("a", true), label("b", false), label("t", true)},
                                 {SftDataset::CPCL, false, {}}, c);
  ASSERT_EQ(r.samples.size(), 2u);
  EXPECT_EQ(r.samples[0].meta.doc_id, "a");  // ordered by id
  EXPECT_EQ(r.report.inputs, 2u);
  EXPECT_EQ(r.report.unlabeled, 1u);
  EXPECT_TRUE(r.report.conserved());
}

TEST(SftFromLabels, DpmUsesLevels) {
  const auto& c = default_template_config();
  auto l1 = label("a", false);
  l1.dpm_level = 3;
  auto l2 = label("b", false);
  l2.dpm_level = 1;
  auto r = build_sft_from_labels({doc("a", "one"), doc("b", "two")}, {l1, l2}, {SftDataset::DPM, false, {}}, c);
  EXPECT_EQ(r.samples[0].output, "Yes, PCL");
  EXPECT_EQ(r.samples[1].output, "No, not PCL");
  EXPECT_THROW(build_sft_from_labels({doc("a", "one")}, {label("a", true)}, {SftDataset::DPM, false, {}}, c),
               ValidationError);
}

TEST(SftFromPairs, DropsUnsureAndOffensiveAndConserves) {
  const auto& c = default_template_config();
  std::vector<TextPair> pairs = {{"p1", "hi", "you poor thing", PairLabel::PCL},
                                 {"p2", "hi", "you idiot", PairLabel::NOT_PCL},
                                 {"p3", "hmm", "maybe", PairLabel::UNSURE},
                                 {"p4", "ok", std::string(4000, 'z'), PairLabel::NOT_PCL}};
  auto r = build_sft_from_pairs(pairs, offensive_matcher(), {SftDataset::TD, false, {}}, c);
  EXPECT_EQ(r.report.unsure_dropped, 1u);
  EXPECT_EQ(r.report.inputs, 3u);
  EXPECT_EQ(r.report.offensive_removed, 1u);
  EXPECT_EQ(r.report.length_discarded, 1u);
  EXPECT_EQ(r.report.discarded_ids, std::vector<std::string>{"p4"});
  ASSERT_EQ(r.samples.size(), 1u);
  EXPECT_EQ(r.samples[0].input, "hi ⟦SEP⟧ you poor thing");
  EXPECT_TRUE(r.report.conserved());
}

TEST(SftExport, ReloadsAndReexportsIdentically) {
  test::TempDir dir;
  const auto& c = default_template_config();
  std::map<std::string, double> scores = {{"a", 0.9}, {"b", 0.1}};
  auto r = build_sft_from_labels({doc("a", "first"), doc("b", "第二", Language::ZH)},
                                 {label("a", true), label("b", false)}, {SftDataset::CPCL, true, scores}, c);
  save_samples(r.samples, dir / "s.jsonl");
  auto loaded = load_samples(dir / "s.jsonl", c);
  EXPECT_EQ(loaded, r.samples);
  save_samples(loaded, dir / "s2.jsonl");
  EXPECT_EQ(read_file(dir / "s.jsonl"), read_file(dir / "s2.jsonl"));
}

TEST(SftExport, LoadRejectsBrokenSamples) {
  test::TempDir dir;
  write_file_atomic(dir / "bad.jsonl",
                    R"({"instruction":"x","input":"y","output":"maybe","meta":{"source":"cpcl","doc_id":"d","language":"EN"}})" "\n");
  EXPECT_THROW(load_samples(dir / "bad.jsonl", default_template_config()), ValidationError);
}
