#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace pclkit::utf8 {

/// One decoded code point and the byte range it occupies.
struct CodePoint {
  char32_t value;
  std::size_t begin;
  std::size_t end;
};

/// Decodes the code point starting at `pos`. Ill-formed sequences decode
/// as U+FFFD spanning one byte so callers always make progress.
CodePoint decode_at(std::string_view text, std::size_t pos);

std::vector<CodePoint> decode(std::string_view text);

void append(std::string& out, char32_t cp);

bool is_valid(std::string_view text);

/// Number of Unicode scalar values.
std::size_t length(std::string_view text);

/// Simple (1:1) Unicode case folding applied per code point.
std::string fold_case(std::string_view text);
char32_t fold_case(char32_t cp);

bool is_alnum(char32_t cp);
bool is_whitespace(char32_t cp);
bool is_punct(char32_t cp);
/// Letters, combining marks and digits of any script.
bool is_word_char(char32_t cp);

/// Collapses every run of Unicode whitespace to one ASCII space and trims
/// both ends.
std::string collapse_whitespace(std::string_view text);

std::string trim(std::string_view text);

/// Unicode NFKC normalization.
std::string nfkc(std::string_view text);

}  // namespace pclkit::utf8
