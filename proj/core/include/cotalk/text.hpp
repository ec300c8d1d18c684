#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the semantic model, the mock gateway and the
// metrics. All functions treat text as ASCII-lowercasable UTF-8.
namespace cotalk::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

/// Lowercases, trims and collapses internal whitespace runs to one space.
std::string normalize(std::string_view s);

/// normalize() plus removal of leading articles ("a", "an", "the").
std::string normalize_object_name(std::string_view s);

/// Whitespace-delimited tokens after trimming.
std::vector<std::string> split_words(std::string_view s);
std::size_t word_count(std::string_view s);

/// Splits on '.', '!' or '?' followed by whitespace or end of text. Each
/// returned sentence is trimmed and keeps its terminal punctuation.
std::vector<std::string> split_sentences(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace cotalk::text
