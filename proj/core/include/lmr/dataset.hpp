// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Model-ready samples: one manifest record plus its three feature matrices.
//
// Directory layout read by load_dataset:
//   manifest.jsonl          episodes
//   {vid}.visual.fmt1       F^v
//   {vid}.context.fmt1      F^t (else descriptions.jsonl is embedded)
//   {qid}.query.fmt1        F^l (else the query text is embedded)
//   dataset.json            optional; supplies the embedder seed and width

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "lmr/feature_matrix.hpp"
#include "lmr/manifest.hpp"
#include "lmr/synthetic_world.hpp"
#include "lmr/text_embedder.hpp"

namespace lmr {

struct Sample {
    EpisodeRecord record;
    FeatureMatrix visual;   // N^v x visual_dim
    FeatureMatrix context;  // N^t x text_dim
    FeatureMatrix query;    // N^l x text_dim
};

// Embedder matching a generated world: same width and seed as its attribute
// vectors.
TextEmbedderConfig world_text_config(const WorldConfig& cfg);

// Embedder for a dataset directory: dataset.json when present, else defaults.
TextEmbedderConfig dataset_text_config(const std::filesystem::path& dir);

std::vector<Sample> to_samples(const std::vector<EpisodeBundle>& bundles, const TextEmbedderConfig& text);

struct DatasetOptions {
    // Overrides dataset.json when set.
    std::optional<TextEmbedderConfig> text;
    std::size_t threads = 1;
};

// Throws IoError if the directory or a referenced file is missing and
// ShapeError if a stream's row count differs from the record's clip_count.
std::vector<Sample> load_dataset(const std::filesystem::path& dir, const DatasetOptions& options = {});

// Replaces every context stream by zeros of the same shape.
void ablate_context(std::vector<Sample>& samples);

std::vector<Sample> filter_samples(const std::vector<Sample>& samples, const std::vector<EpisodeRecord>& keep);

}  // namespace lmr
