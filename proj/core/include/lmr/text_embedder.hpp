// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lmr/feature_matrix.hpp"
#include "lmr/manifest.hpp"

namespace lmr {

/// Deterministic bag-of-words text encoder. Every token hashes to a fixed
/// random unit vector, so query words and clip descriptions land in one
/// shared embedding space without any pretrained weights.
struct TextEmbedderConfig {
    std::uint32_t dim = 64;
    std::uint64_t seed = 7;
    bool lowercase = true;
    bool strip_punctuation = true;

    void validate() const;
};

std::vector<std::string> tokenize(std::string_view text, const TextEmbedderConfig& cfg);

// Unit-norm vector for one already-normalized token.
std::vector<float> embed_token(std::string_view token, std::uint32_t dim, std::uint64_t seed);

// L2-normalized sum of token vectors; the zero vector for empty text.
std::vector<float> embed_text(std::string_view text, const TextEmbedderConfig& cfg);

// One unit row per token (N^l x dim). Throws ValidationError on empty text.
FeatureMatrix embed_query_sequence(std::string_view text, const TextEmbedderConfig& cfg);

// Row i embeds the description of clip i. Records may arrive in any order
// but must cover clip indices 0..n-1 exactly once (CoverageError otherwise).
// When expected_clips is non-zero it must equal n.
FeatureMatrix embed_descriptions(std::vector<DescriptionRecord> records,
                                 const TextEmbedderConfig& cfg, std::uint32_t expected_clips = 0);

}  // namespace lmr
