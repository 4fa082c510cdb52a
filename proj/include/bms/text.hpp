#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace bms {

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

// Collapses internal runs of whitespace to single spaces (leading/trailing removed).
std::string collapse_whitespace(std::string_view s);

// trim + case-fold + whitespace collapse; the canonical form used for matching.
std::string normalize_text(std::string_view s);

// Maximal runs of [A-Za-z0-9], lowercased.
std::vector<std::string> tokenize(std::string_view s);

// Substring test on normalized haystack/needle.
bool contains_normalized(std::string_view haystack, std::string_view needle);

// Whole-word occurrence of `needle` in `haystack` (both already normalized).
bool contains_word(std::string_view haystack, std::string_view needle);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Percent-encodes everything outside the RFC 3986 unreserved set.
std::string url_encode(std::string_view s);

// Decodes %XX escapes and '+' as space; malformed escapes pass through.
std::string url_decode(std::string_view s);

} // namespace bms
