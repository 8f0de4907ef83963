#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by every module. All operations work on Unicode
// scalar values; malformed bytes decode to U+FFFD.
namespace sure::text {

std::vector<char32_t> decode_utf8(std::string_view s);
std::string encode_utf8(const std::vector<char32_t>& cps);
void append_utf8(std::string& out, char32_t cp);

bool is_space(char32_t cp);

// Simple one-to-one case folding (no locale, no multi-char expansions).
char32_t fold_case(char32_t cp);
std::string fold_case(std::string_view s);
bool is_upper(char32_t cp);

// Runs of whitespace become a single U+0020; leading/trailing runs are kept
// as one space as well so that substring checks stay monotone.
std::string collapse_whitespace(std::string_view s);
std::string trim(std::string_view s);

// Words are maximal runs of non-whitespace.
std::vector<std::string> split_words(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

}  // namespace sure::text
