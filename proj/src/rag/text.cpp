#include "swarm/rag/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace swarm::rag {

namespace {

constexpr std::array<std::string_view, 20> abbreviations = {
    "e.g.", "i.e.", "etc.", "vs.", "cf.", "approx.", "Dr.", "Mr.", "Mrs.", "Ms.",
    "Prof.", "Fig.", "Eq.", "No.", "Inc.", "Ltd.", "St.", "al.", "Sec.", "Vol."};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool ends_with_abbreviation(std::string_view text, std::size_t end) {
    // `end` is one past the terminating '.'; the word starts after the last space.
    auto start = text.rfind(' ', end - 1);
    start = start == std::string_view::npos ? 0 : start + 1;
    auto word = text.substr(start, end - start);
    while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) word.remove_prefix(1);
    return std::find(abbreviations.begin(), abbreviations.end(), word) != abbreviations.end();
}

} // namespace

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += c;
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i + 2 < text.size(); ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        if (text[i + 1] != ' ' || !std::isupper(static_cast<unsigned char>(text[i + 2]))) continue;
        if (c == '.' && ends_with_abbreviation(text, i + 1)) continue;
        out.emplace_back(text.substr(start, i + 1 - start));
        start = i + 2;
    }
    if (start < text.size()) out.emplace_back(text.substr(start));
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        auto u = static_cast<unsigned char>(c);
        if (u < 0x80 && std::isalnum(u)) {
            current += static_cast<char>(std::tolower(u));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

} // namespace swarm::rag
