// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Query-to-context attention per clip, taken from the context-stream VQF
// layers. For each layer the raw scores (clips x words) are normalized over
// clips for every query word and head, then averaged over heads and words, so
// a layer's profile sums to 1 across clips.

#pragma once

#include <filesystem>
#include <vector>

#include "lmr/network.hpp"

namespace lmr {

struct AttentionProfile {
    std::vector<std::vector<double>> layers;  // layer -> clip -> mass
};

// Per-word distributions over clips for one layer and head: words x clips,
// every row sums to 1.
Mat<double> word_to_clip_attention(const AttentionMaps<float>& maps, std::size_t head);

// Throws StateError if the forward pass did not record attention.
AttentionProfile context_attention_profile(const ForwardOutput& fwd);

// CSV with columns layer,clip_index,attention.
void export_attention(const ForwardOutput& fwd, const std::filesystem::path& path);

}  // namespace lmr
