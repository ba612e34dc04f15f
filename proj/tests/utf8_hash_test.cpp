#include <gtest/gtest.h>

#include <cmath>

#include "pclkit/error.hpp"
#include "pclkit/hash.hpp"
#include "pclkit/io.hpp"
#include "pclkit/utf8.hpp"
#include "test_support.hpp"

using namespace pclkit;

TEST(Utf8, DecodesMixedScripts) {
  auto cps = utf8::decode("aé中😀");
  ASSERT_EQ(cps.size(), 4u);
  EXPECT_EQ(cps[0].value, U'a');
  EXPECT_EQ(cps[1].value, U'é');
  EXPECT_EQ(cps[2].value, U'中');
  EXPECT_EQ(cps[3].value, U'😀');
  EXPECT_EQ(utf8::length("aé中😀"), 4u);
}

TEST(Utf8, InvalidBytesDecodeToReplacement) {
  const std::string bad = "a\xC3";
  EXPECT_FALSE(utf8::is_valid(bad));
  auto cps = utf8::decode(bad);
  ASSERT_EQ(cps.size(), 2u);
  EXPECT_EQ(cps[1].value, 0xFFFD);
  EXPECT_FALSE(utf8::is_valid("\xED\xA0\x80"));  // surrogate
  EXPECT_TRUE(utf8::is_valid("plain"));
}

TEST(Utf8, AppendRoundTrips) {
  std::string out;
  for (char32_t cp : {U'x', U'ß', U'中', U'😀'}) utf8::append(out, cp);
  EXPECT_EQ(out, "xß中😀");
}

TEST(Utf8, FoldCaseIsSimpleAndPerCodePoint) {
  EXPECT_EQ(utf8::fold_case("HeLLo ÉCOLE"), "hello école");
  EXPECT_EQ(utf8::fold_case("中文"), "中文");
}

TEST(Utf8, WhitespaceHelpers) {
  EXPECT_EQ(utf8::collapse_whitespace("  a \t b　 c  "), "a b c");
  EXPECT_EQ(utf8::trim("\n x y \t"), "x y");
}

TEST(Utf8, NfkcFoldsCompatibilityForms) {
  EXPECT_EQ(utf8::nfkc("ＡＢＣ１２３"), "ABC123");
  EXPECT_EQ(utf8::nfkc("＠user"), "@user");
}

TEST(Hash, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Hash, Fnv1aKnownVector) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Hash, KeyedUniformIsDeterministicAndInRange) {
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const std::string key = "doc-" + std::to_string(i);
    const double u = keyed_uniform(7, key);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_EQ(u, keyed_uniform(7, key));
    sum += u;
  }
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
  EXPECT_NE(keyed_uniform(7, "doc-1"), keyed_uniform(8, "doc-1"));
}

TEST(Io, AtomicWriteReplacesWholeFile) {
  test::TempDir dir;
  auto path = dir / "nested/out.txt";
  write_file_atomic(path, "first\n");
  write_file_atomic(path, "second\n");
  EXPECT_EQ(read_file(path), "second\n");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(path.parent_path())) ++entries;
  EXPECT_EQ(entries, 1u);  // no temp file left behind
}

TEST(Io, UncommittedAtomicFileLeavesNothing) {
  test::TempDir dir;
  auto path = dir / "out.txt";
  {
    AtomicFile f(path);
    f.stream() << "partial";
  }
  EXPECT_FALSE(std::filesystem::exists(path));
  EXPECT_TRUE(std::filesystem::is_empty(dir.path()));
}

TEST(Io, ForEachLineStripsCarriageReturns) {
  test::TempDir dir;
  write_file_atomic(dir / "f.txt", "a\r\nb\n\nc");
  std::vector<std::pair<std::string, std::size_t>> lines;
  for_each_line(dir / "f.txt", [&](std::string_view l, std::size_t n) { lines.emplace_back(l, n); });
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0].first, "a");
  EXPECT_EQ(lines[2].first, "");
  EXPECT_EQ(lines[3], (std::pair<std::string, std::size_t>{"c", 4}));
}

TEST(Io, MissingFileIsIoError) {
  EXPECT_THROW(read_file("/nonexistent/pclkit/file"), IoError);
}
