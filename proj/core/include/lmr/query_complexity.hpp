// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Rule-based query complexity and the complex-query validation split.
//
// count_clauses = 1 + number of marker tokens, where a marker is
//   - a relative pronoun: who which that whom whose
//   - a subordinator: while when because although if after before since as until
//   - "and" or "but" with a token ending in s, ed or ing among the next three
// Tokens are compared lowercased with surrounding punctuation removed.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lmr/manifest.hpp"

namespace lmr {

struct CQvalThresholds {
    std::size_t least_clause_count = 1;
    std::size_t least_word_count = 1;

    void validate() const;
};

// Parses "C,W".
CQvalThresholds parse_cqval(std::string_view text);

std::size_t count_words(std::string_view query);
std::size_t count_clauses(std::string_view query);

// Records meeting both thresholds, in manifest order.
std::vector<EpisodeRecord> build_cqval_split(const std::vector<EpisodeRecord>& manifest, const CQvalThresholds& t);

}  // namespace lmr
