#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sii {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool contains(std::string_view haystack, std::string_view needle);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

/// True for ASCII whitespace and the common Unicode space code points
/// (NBSP, en/em spaces, thin space, ideographic space) encoded as UTF-8.
/// `i` is advanced past the whitespace run when one is found.
bool is_space_at(std::string_view s, size_t i, size_t& next);

/// Collapse every whitespace run to a single ' ' and trim the ends.
std::string normalize_whitespace(std::string_view s);

/// Whitespace-delimited tokens; punctuation stays inside tokens.
std::vector<std::string> split_words(std::string_view s);

size_t count_words(std::string_view s);

/// Split on any of the separator strings (longest match wins), trim each
/// piece, drop empties, and keep the first occurrence of duplicates.
std::vector<std::string> split_on_separators(std::string_view s,
                                             const std::vector<std::string>& separators);

std::vector<std::string> split_lines(std::string_view s);

bool iequals(std::string_view a, std::string_view b);

uint64_t fnv1a64(std::string_view s);
std::string fnv1a64_hex(std::string_view s);

}  // namespace sii
