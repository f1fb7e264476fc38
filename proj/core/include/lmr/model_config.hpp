// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace lmr {

struct ModelConfig {
    std::uint32_t hidden_dim = 256;
    std::uint32_t heads = 8;
    std::uint32_t vqf_layers = 2;
    std::uint32_t vcm_layers = 2;
    std::uint32_t decoder_layers = 2;
    std::uint32_t k_moment_queries = 10;
    std::uint32_t visual_dim = 64;
    std::uint32_t text_dim = 64;
    double dropout = 0.1;
    // Hidden width of feed-forward blocks as a multiple of hidden_dim.
    std::uint32_t ffn_expansion = 1;
    // Fixed sinusoidal clip positions added to both video streams.
    bool clip_positions = true;

    void validate() const;
    std::uint32_t ffn_dim() const { return hidden_dim * ffn_expansion; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// N^v = N^t = 4, d = 8, two heads, two moment queries: small enough for
// exhaustive finite-difference checks.
ModelConfig tiny_model_config();

}  // namespace lmr
