#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace swarm::rag {

/// Trims and collapses every whitespace run to a single space.
std::string normalize_text(std::string_view text);

/// Sentences of normalized text. A boundary is '.', '!' or '?' followed by a
/// space and an uppercase letter, except after an allowlisted abbreviation
/// ("e.g.", "Dr.", "Fig.", …). Joining the result with a single space
/// reproduces the input.
std::vector<std::string> split_sentences(std::string_view normalized);

/// Lowercase ASCII-alphanumeric runs; other bytes separate tokens.
std::vector<std::string> tokenize(std::string_view text);

inline constexpr std::string_view sentence_separator = " ";

} // namespace swarm::rag
