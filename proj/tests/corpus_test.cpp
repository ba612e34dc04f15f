#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "pclkit/corpus.hpp"
#include "pclkit/io.hpp"
#include "test_support.hpp"

using namespace pclkit;
using nlohmann::json;

namespace {

Document doc(std::string id, std::string text = "some text") {
  Document d;
  d.id = std::move(id);
  d.text = std::move(text);
  return d;
}

LabelRecord pcl_label(std::string doc_id, std::string annotator = "a1") {
  LabelRecord l;
  l.doc_id = std::move(doc_id);
  l.annotator_id = std::move(annotator);
  l.pcl = true;
  l.subcategories = {Subcategory::APPEAL};
  l.intensity = Intensity::MODERATE;
  return l;
}

bool has_field(const std::vector<FieldError>& errors, const std::string& field) {
  return std::any_of(errors.begin(), errors.end(), [&](const FieldError& e) { return e.field == field; });
}

}  // namespace

TEST(Enums, WireNamesRoundTrip) {
  for (auto g : all_values<GroupTag>()) EXPECT_EQ(parse_enum<GroupTag>(to_string(g)), g);
  EXPECT_EQ(to_string(Subcategory::COMPASSION), "COMPASSION");
  EXPECT_THROW(parse_enum<Language>("FR"), ValidationError);
  EXPECT_EQ(enum_count<GroupTag>(), 8u);
}

TEST(Document, ValidationRejectsBlankTextAndTrainInterference) {
  EXPECT_TRUE(check(doc("d1")).empty());
  EXPECT_TRUE(has_field(check(doc("d1", "  \t ")), "text"));
  EXPECT_TRUE(has_field(check(doc("")), "id"));
  auto d = doc("d2");
  d.interference = true;
  d.split = Split::TRAIN;
  EXPECT_TRUE(has_field(check(d), "interference"));
  d.split = Split::TEST;
  EXPECT_TRUE(check(d).empty());
}

TEST(LabelRecord, GatingInvariants) {
  auto l = pcl_label("d1");
  EXPECT_TRUE(check(l).empty());

  LabelRecord neg;
  neg.doc_id = "d1";
  neg.annotator_id = "a1";
  neg.subcategories = {Subcategory::PREJUDICE};
  EXPECT_TRUE(has_field(check(neg), "subcategories"));
  neg.subcategories.clear();
  neg.intensity = Intensity::MILD;
  EXPECT_TRUE(has_field(check(neg), "intensity"));

  l.subcategories.clear();
  EXPECT_TRUE(has_field(check(l), "subcategories"));
  l = pcl_label("d1");
  l.dpm_level = 5;
  EXPECT_TRUE(has_field(check(l), "dpm_level"));
}

TEST(Jsonl, DocumentsRoundTripByteIdentically) {
  test::TempDir dir;
  std::vector<Document> docs = {doc("a", "第一条"), doc("b", "second \"quoted\"")};
  docs[0].language = Language::ZH;
  docs[0].source = Source::WEIBO;
  docs[0].group_tag = GroupTag::ELDERLY;
  docs[1].collected_at = parse_date("2023-05-17");
  auto manifest = save_documents(docs, dir / "docs.jsonl", "mini", Stage::PT);
  EXPECT_EQ(manifest.doc_count, 2u);
  EXPECT_FALSE(manifest.language.has_value());  // mixed languages
  auto loaded = load_documents(dir / "docs.jsonl");
  EXPECT_EQ(loaded, docs);
  EXPECT_EQ(serialize_documents(loaded), read_file(dir / "docs.jsonl"));
  EXPECT_EQ(manifest.checksum.size(), 64u);
}

TEST(Jsonl, DuplicateIdNamesBothLines) {
  test::TempDir dir;
  write_file_atomic(dir / "d.jsonl",
                    R"({"id":"x","text":"one","language":"EN","source":"REDDIT"})" "\n"
                    R"({"id":"y","text":"two","language":"EN","source":"REDDIT"})" "\n"
                    R"({"id":"x","text":"three","language":"EN","source":"REDDIT"})" "\n");
  try {
    load_documents(dir / "d.jsonl");
    FAIL() << "expected a ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("lines 1 and 3"), std::string::npos) << e.what();
  }
}

TEST(Jsonl, UnknownFieldsAndBadEnumsAreRejected) {
  test::TempDir dir;
  write_file_atomic(dir / "d.jsonl", R"({"id":"x","text":"one","language":"EN","source":"REDDIT","colour":"red"})" "\n");
  EXPECT_THROW(load_documents(dir / "d.jsonl"), ParseError);
  write_file_atomic(dir / "l.jsonl", R"({"doc_id":"x","annotator_id":"a","pcl":true,"subcategories":["NOPE"]})" "\n");
  EXPECT_THROW(load_labels(dir / "l.jsonl"), ParseError);
}

TEST(Jsonl, LabelsRoundTrip) {
  test::TempDir dir;
  auto a = pcl_label("d1", "a1");
  a.group = GroupTag::WOMEN;
  LabelRecord b;
  b.doc_id = "d1";
  b.annotator_id = "a2";
  b.dpm_level = 1;
  save_labels({a, b}, dir / "l.jsonl");
  auto loaded = load_labels(dir / "l.jsonl");
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0], a);
  EXPECT_EQ(loaded[1], b);
}

TEST(FinalLabels, ProofreadWinsOverPrimary) {
  auto a = pcl_label("d1", "a1");
  LabelRecord b;
  b.doc_id = "d1";
  b.annotator_id = "a2";
  auto p = pcl_label("d1", "p");
  p.round = Round::PROOFREAD;
  p.intensity = Intensity::SEVERE;
  auto finals = resolve_final_labels({a, b, p});
  EXPECT_EQ(finals.at("d1").intensity, Intensity::SEVERE);
  EXPECT_EQ(resolve_final_labels({b, a}).at("d1").pcl, false);  // first primary otherwise
}

TEST(Proportions, RoundHalfUpInTenths) {
  EXPECT_EQ(proportion_tenths(2135, 9270), 230);
  EXPECT_EQ(proportion_tenths(1, 8), 125);   // 12.5 exactly
  EXPECT_EQ(proportion_tenths(1, 16), 63);   // 6.25 -> 6.3
  EXPECT_EQ(proportion_tenths(0, 0), std::nullopt);
  EXPECT_EQ(format_tenths(230), "23.0");
  EXPECT_EQ(format_tenths(5), "0.5");
}

// Expands the published per-platform, per-group counts into records and
// checks every derived cell.
TEST(PlatformStats, ReproducesPublishedCorpusTable) {
  std::vector<Document> docs;
  std::vector<LabelRecord> labels;
  struct Row { Source source; GroupTag group; std::size_t total, pos; std::string prop; };
  std::vector<Row> rows;
  std::ifstream in(test::source_path("tests/fixtures/cpcl_counts.tsv"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream cols(line);
    std::string platform, group, prop;
    std::size_t total = 0, pos = 0;
    cols >> platform >> group >> total >> pos >> prop;
    rows.push_back({parse_enum<Source>(platform), parse_enum<GroupTag>(group), total, pos, prop});
  }
  ASSERT_EQ(rows.size(), 14u);
  std::size_t n = 0;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.total; ++i) {
      auto d = doc("d" + std::to_string(n++), "text");
      d.language = Language::ZH;
      d.source = r.source;
      d.group_tag = r.group;
      LabelRecord l;
      l.doc_id = d.id;
      l.annotator_id = "a";
      if (i < r.pos) {
        l.pcl = true;
        l.subcategories = {Subcategory::SPECTATOR};
      }
      docs.push_back(std::move(d));
      labels.push_back(std::move(l));
    }
  }
  auto stats = compute_platform_stats(docs, labels);
  for (const auto& r : rows) {
    auto cell = stats.cell(r.source, r.group);
    EXPECT_EQ(cell.total, r.total);
    EXPECT_EQ(cell.positives, r.pos);
    EXPECT_EQ(cell.proportion_text(), r.prop) << to_string(r.source) << " " << to_string(r.group);
  }
  EXPECT_EQ(stats.platform_totals.at(Source::ZHIHU).total, 9270u);
  EXPECT_EQ(stats.platform_totals.at(Source::ZHIHU).positives, 2135u);
  EXPECT_EQ(stats.platform_totals.at(Source::ZHIHU).proportion_text(), "23.0");
  EXPECT_EQ(stats.platform_totals.at(Source::WEIBO).total, 8983u);
  EXPECT_EQ(stats.platform_totals.at(Source::WEIBO).positives, 2455u);
  EXPECT_EQ(stats.platform_totals.at(Source::WEIBO).proportion_text(), "27.3");
  EXPECT_EQ(stats.grand_total.total, 18253u);
  EXPECT_EQ(stats.group_totals.at(GroupTag::CHILDREN).total, 3207u);
  EXPECT_EQ(stats.group_totals.at(GroupTag::DISADVANTAGED).total, 4010u);
  EXPECT_EQ(stats.cell(Source::NEWS, GroupTag::WOMEN).proportion_text(), "n/a");
  EXPECT_NE(stats.render().find("27.3"), std::string::npos);
}

TEST(PlatformStats, LabelGroupOverridesDocumentTag) {
  auto d = doc("d1");
  d.source = Source::WEIBO;
  d.group_tag = GroupTag::WOMEN;
  auto l = pcl_label("d1");
  l.group = GroupTag::ELDERLY;
  auto stats = compute_platform_stats({d}, {l});
  EXPECT_EQ(stats.cell(Source::WEIBO, GroupTag::ELDERLY).total, 1u);
  EXPECT_EQ(stats.cell(Source::WEIBO, GroupTag::WOMEN).total, 0u);
}
