#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace triage::text {

std::string to_lower(std::string_view s);

// Replaces every run of whitespace (space, tab, CR, LF, ...) with a single
// space and trims both ends.
std::string collapse_whitespace(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& tokens, std::string_view sep);

size_t count_occurrences(std::string_view haystack, std::string_view needle);

// Word n-grams over `tokens` for every n in [lo, hi], joined by one space.
std::vector<std::string> word_ngrams(const std::vector<std::string>& tokens,
                                     int lo, int hi);

}  // namespace triage::text
