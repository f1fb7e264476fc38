// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/query_complexity.hpp"

#include <array>
#include <charconv>

#include "lmr/errors.hpp"

namespace lmr {

namespace {

constexpr std::array<std::string_view, 15> kMarkers = {
    "who", "which", "that", "whom", "whose", "while", "when", "because",
    "although", "if", "after", "before", "since", "as", "until",
};

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_alnum(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        const std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

std::string normalize(std::string_view tok) {
    std::size_t b = 0, e = tok.size();
    while (b < e && !is_alnum(tok[b])) ++b;
    while (e > b && !is_alnum(tok[e - 1])) --e;
    std::string out(tok.substr(b, e - b));
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool verb_like(const std::string& t) {
    return ends_with(t, "s") || ends_with(t, "ed") || ends_with(t, "ing");
}

std::size_t parse_count(std::string_view s, const char* what) {
    std::size_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw ConfigError(std::string("bad ") + what + " in C-QVal thresholds: '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace

void CQvalThresholds::validate() const {
    if (least_clause_count < 1 || least_word_count < 1) throw ConfigError("C-QVal thresholds must be >= 1");
}

CQvalThresholds parse_cqval(std::string_view text) {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw ConfigError("C-QVal thresholds must look like C,W");
    CQvalThresholds t;
    t.least_clause_count = parse_count(text.substr(0, comma), "clause count");
    t.least_word_count = parse_count(text.substr(comma + 1), "word count");
    t.validate();
    return t;
}

std::size_t count_words(std::string_view query) {
    return split_ws(query).size();
}

std::size_t count_clauses(std::string_view query) {
    std::vector<std::string> tokens;
    for (auto raw : split_ws(query)) tokens.push_back(normalize(raw));
    if (tokens.empty()) return 0;
    std::size_t clauses = 1;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        bool marker = false;
        for (auto m : kMarkers) marker = marker || t == m;
        if (!marker && (t == "and" || t == "but")) {
            for (std::size_t j = i + 1; j < tokens.size() && j <= i + 3; ++j) {
                if (verb_like(tokens[j])) {
                    marker = true;
                    break;
                }
            }
        }
        clauses += marker;
    }
    return clauses;
}

std::vector<EpisodeRecord> build_cqval_split(const std::vector<EpisodeRecord>& manifest, const CQvalThresholds& t) {
    t.validate();
    std::vector<EpisodeRecord> out;
    for (const auto& r : manifest) {
        if (count_clauses(r.query) >= t.least_clause_count && count_words(r.query) >= t.least_word_count) {
            out.push_back(r);
        }
    }
    return out;
}

}  // namespace lmr
