// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lmr/feature_matrix.hpp"
#include "lmr/manifest.hpp"

namespace lmr {

enum class AttributeKind : std::uint8_t { action, background, appearance, idle };

struct Vocabulary {
    std::uint32_t actions = 20;
    std::uint32_t backgrounds = 20;
    std::uint32_t appearances = 20;
};

/// Parameters of the toy world. Each episode holds one target segment and
/// `distractors_per_episode` segments performing the same action in other
/// scenes; with `context_only_fraction` = 1 the scene is visible only in the
/// description features.
struct WorldConfig {
    std::uint64_t seed = 42;
    // Attribute/token embeddings come from this seed, independent of `seed`,
    // so datasets generated with different seeds share one embedding space.
    std::uint64_t embedding_seed = 7;
    std::uint32_t episodes = 2000;
    std::uint32_t clip_count = 40;
    double clip_seconds = 2.0;
    std::uint32_t visual_dim = 64;
    std::uint32_t text_dim = 64;
    Vocabulary vocab;
    std::uint32_t distractors_per_episode = 2;
    std::uint32_t min_segment_clips = 6;
    std::uint32_t max_segment_clips = 12;
    double noise_sigma = 0.1;
    double context_only_fraction = 1.0;

    void validate() const;
};

struct EpisodeBundle {
    EpisodeRecord record;
    FeatureMatrix visual;   // clip_count x visual_dim
    FeatureMatrix context;  // clip_count x text_dim
    std::string query_text;
    std::vector<std::string> query_tokens;
};

// Canonical token naming an attribute, e.g. "background3".
std::string attribute_token(AttributeKind kind, std::uint32_t id);

// Unit vector in the text space; identical to embed_token(attribute_token(...)).
std::vector<float> embed_attribute(AttributeKind kind, std::uint32_t id, std::uint32_t dim,
                                   std::uint64_t seed);

// Unit vector in the visual feature space (separate hash stream).
std::vector<float> embed_visual_attribute(AttributeKind kind, std::uint32_t id, std::uint32_t dim,
                                          std::uint64_t seed);

// Episode `index` of the dataset. `noise_stream` selects an independent noise
// realization while keeping the layout fixed (used for Monte-Carlo checks).
EpisodeBundle generate_episode(const WorldConfig& cfg, std::uint32_t index,
                               std::uint64_t noise_stream = 0);

std::vector<EpisodeBundle> generate_dataset(const WorldConfig& cfg, std::size_t threads = 1);

// Byte image of a bundle (manifest line + both FMT1 payloads).
std::vector<std::uint8_t> serialize_bundle(const EpisodeBundle& bundle);

// {out}/manifest.jsonl, {out}/{vid}.visual.fmt1, {out}/{vid}.context.fmt1 and
// {out}/dataset.json describing the embedding space.
void write_dataset(const std::vector<EpisodeBundle>& bundles, const WorldConfig& cfg,
                   const std::filesystem::path& out_dir);

}  // namespace lmr
