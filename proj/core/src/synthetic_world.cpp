// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/synthetic_world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "lmr/errors.hpp"
#include "lmr/parallel.hpp"
#include "lmr/random.hpp"
#include "lmr/text_embedder.hpp"

namespace lmr {

namespace {

constexpr std::uint64_t kLayoutStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kVisualSpace = 0x56495355414cull;  // "VISUAL"

struct Segment {
    std::uint32_t start = 0;
    std::uint32_t length = 0;
    std::uint32_t background = 0;
    std::uint32_t appearance = 0;
};

std::vector<std::uint32_t> distinct_ids(std::mt19937_64& rng, std::uint32_t universe,
                                        std::uint32_t count) {
    std::vector<std::uint32_t> ids(universe);
    std::iota(ids.begin(), ids.end(), 0u);
    // Partial Fisher-Yates with an explicit distribution so the draw sequence
    // does not depend on the standard library's shuffle implementation.
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::uint32_t> pick(i, universe - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(count);
    return ids;
}

void accumulate(std::span<float> row, const std::vector<float>& v) {
    for (std::size_t i = 0; i < row.size(); ++i) row[i] += v[i];
}

}  // namespace

void WorldConfig::validate() const {
    const std::uint32_t segments = distractors_per_episode + 1;
    if (episodes == 0 || clip_count == 0 || visual_dim == 0 || text_dim == 0) {
        throw ConfigError("world counts and dimensions must be positive");
    }
    if (vocab.actions == 0 || vocab.backgrounds == 0 || vocab.appearances == 0) {
        throw ConfigError("attribute vocabularies must be non-empty");
    }
    if (!(clip_seconds > 0.0)) throw ConfigError("clip_seconds must be positive");
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
    if (!(context_only_fraction >= 0.0 && context_only_fraction <= 1.0)) {
        throw ConfigError("context_only_fraction must lie in [0, 1]");
    }
    if (min_segment_clips == 0 || min_segment_clips > max_segment_clips) {
        throw ConfigError("segment length range must satisfy 1 <= min <= max");
    }
    if (std::uint64_t(segments) * max_segment_clips > clip_count) {
        throw ConfigError("cannot place " + std::to_string(segments) + " segments of up to " +
                          std::to_string(max_segment_clips) + " clips in " +
                          std::to_string(clip_count) + " clips without overlap");
    }
    if (vocab.backgrounds < segments || vocab.appearances < segments) {
        throw ConfigError("need at least " + std::to_string(segments) +
                          " backgrounds and appearances for distinct segment scenes");
    }
}

std::string attribute_token(AttributeKind kind, std::uint32_t id) {
    switch (kind) {
        case AttributeKind::action: return "action" + std::to_string(id);
        case AttributeKind::background: return "background" + std::to_string(id);
        case AttributeKind::appearance: return "appearance" + std::to_string(id);
        case AttributeKind::idle: return "idle";
    }
    return "unknown";
}

std::vector<float> embed_attribute(AttributeKind kind, std::uint32_t id, std::uint32_t dim,
                                   std::uint64_t seed) {
    return embed_token(attribute_token(kind, id), dim, seed);
}

std::vector<float> embed_visual_attribute(AttributeKind kind, std::uint32_t id, std::uint32_t dim,
                                          std::uint64_t seed) {
    return embed_token(attribute_token(kind, id), dim, derive_seed({seed, kVisualSpace}));
}

EpisodeBundle generate_episode(const WorldConfig& cfg, std::uint32_t index,
                               std::uint64_t noise_stream) {
    cfg.validate();
    std::mt19937_64 layout(derive_seed({cfg.seed, index, kLayoutStream}));
    std::mt19937_64 noise_rng(derive_seed({cfg.seed, index, kNoiseStream, noise_stream}));

    const std::uint32_t n_segments = cfg.distractors_per_episode + 1;
    const std::uint32_t action =
        std::uniform_int_distribution<std::uint32_t>(0, cfg.vocab.actions - 1)(layout);
    const auto backgrounds = distinct_ids(layout, cfg.vocab.backgrounds, n_segments);
    const auto appearances = distinct_ids(layout, cfg.vocab.appearances, n_segments);

    std::vector<Segment> segments(n_segments);
    std::uint32_t occupied = 0;
    std::uniform_int_distribution<std::uint32_t> length_dist(cfg.min_segment_clips,
                                                             cfg.max_segment_clips);
    for (std::uint32_t s = 0; s < n_segments; ++s) {
        segments[s].length = length_dist(layout);
        segments[s].background = backgrounds[s];
        segments[s].appearance = appearances[s];
        occupied += segments[s].length;
    }
    // Split the free clips into n_segments + 1 gaps via sorted cut points.
    const std::uint32_t free_clips = cfg.clip_count - occupied;
    std::vector<std::uint32_t> cuts(n_segments);
    std::uniform_int_distribution<std::uint32_t> cut_dist(0, free_clips);
    for (auto& c : cuts) c = cut_dist(layout);
    std::sort(cuts.begin(), cuts.end());
    std::uint32_t cursor = 0, prev_cut = 0;
    for (std::uint32_t s = 0; s < n_segments; ++s) {
        cursor += cuts[s] - prev_cut;
        prev_cut = cuts[s];
        segments[s].start = cursor;
        cursor += segments[s].length;
    }
    const std::uint32_t target =
        std::uniform_int_distribution<std::uint32_t>(0, n_segments - 1)(layout);
    const bool context_only =
        std::uniform_real_distribution<double>(0.0, 1.0)(layout) < cfg.context_only_fraction;

    const std::uint64_t es = cfg.embedding_seed;
    const auto vis_action = embed_visual_attribute(AttributeKind::action, action, cfg.visual_dim, es);
    const auto vis_idle = embed_visual_attribute(AttributeKind::idle, 0, cfg.visual_dim, es);
    const auto ctx_action = embed_attribute(AttributeKind::action, action, cfg.text_dim, es);
    const auto ctx_idle = embed_attribute(AttributeKind::idle, 0, cfg.text_dim, es);

    auto visual = FeatureMatrix::zeros(cfg.clip_count, cfg.visual_dim, FeatureRole::visual);
    auto context = FeatureMatrix::zeros(cfg.clip_count, cfg.text_dim, FeatureRole::context_text);
    for (std::uint32_t c = 0; c < cfg.clip_count; ++c) {
        accumulate(visual.row(c), vis_idle);
        accumulate(context.row(c), ctx_idle);
    }
    for (const auto& seg : segments) {
        const auto vis_bg =
            embed_visual_attribute(AttributeKind::background, seg.background, cfg.visual_dim, es);
        const auto ctx_bg = embed_attribute(AttributeKind::background, seg.background, cfg.text_dim, es);
        const auto ctx_look =
            embed_attribute(AttributeKind::appearance, seg.appearance, cfg.text_dim, es);
        for (std::uint32_t c = seg.start; c < seg.start + seg.length; ++c) {
            std::fill(visual.row(c).begin(), visual.row(c).end(), 0.0f);
            std::fill(context.row(c).begin(), context.row(c).end(), 0.0f);
            accumulate(visual.row(c), vis_action);
            if (!context_only) accumulate(visual.row(c), vis_bg);
            accumulate(context.row(c), ctx_action);
            accumulate(context.row(c), ctx_bg);
            accumulate(context.row(c), ctx_look);
        }
    }
    if (cfg.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (float& x : visual.data()) x += static_cast<float>(noise(noise_rng));
        for (float& x : context.data()) x += static_cast<float>(noise(noise_rng));
    }

    const Segment& t = segments[target];
    EpisodeBundle b;
    char id[48];
    std::snprintf(id, sizeof(id), "s%llu_%05u", static_cast<unsigned long long>(cfg.seed), index);
    b.record.vid = std::string("vid_") + id;
    b.record.qid = std::string("q_") + id;
    b.query_tokens = {"a",
                      "person",
                      attribute_token(AttributeKind::action, action),
                      "in",
                      attribute_token(AttributeKind::background, t.background),
                      "wearing",
                      attribute_token(AttributeKind::appearance, t.appearance)};
    for (const auto& tok : b.query_tokens) {
        if (!b.query_text.empty()) b.query_text += ' ';
        b.query_text += tok;
    }
    b.record.query = b.query_text;
    b.record.clip_count = cfg.clip_count;
    b.record.clip_seconds = cfg.clip_seconds;
    b.record.duration = cfg.clip_count * cfg.clip_seconds;
    b.record.windows = {{t.start * cfg.clip_seconds, (t.start + t.length) * cfg.clip_seconds}};
    b.record.attributes = {{"action", action},
                           {"target_background", t.background},
                           {"target_appearance", t.appearance},
                           {"target_segment", target},
                           {"context_only", context_only ? 1 : 0}};
    for (std::uint32_t s = 0; s < n_segments; ++s) {
        b.record.attributes["segment" + std::to_string(s) + "_start"] = segments[s].start;
        b.record.attributes["segment" + std::to_string(s) + "_length"] = segments[s].length;
    }
    b.visual = std::move(visual);
    b.context = std::move(context);
    return b;
}

std::vector<EpisodeBundle> generate_dataset(const WorldConfig& cfg, std::size_t threads) {
    cfg.validate();
    std::vector<EpisodeBundle> out(cfg.episodes);
    parallel_for(cfg.episodes, thread_budget(threads),
                 [&](std::size_t i) { out[i] = generate_episode(cfg, static_cast<std::uint32_t>(i)); });
    return out;
}

std::vector<std::uint8_t> serialize_bundle(const EpisodeBundle& bundle) {
    const std::string line = manifest_line(bundle.record) + '\n';
    std::vector<std::uint8_t> out(line.begin(), line.end());
    for (const auto* m : {&bundle.visual, &bundle.context}) {
        const auto bytes = encode_fmt1(*m);
        out.insert(out.end(), bytes.begin(), bytes.end());
    }
    return out;
}

void write_dataset(const std::vector<EpisodeBundle>& bundles, const WorldConfig& cfg,
                   const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<EpisodeRecord> records;
    records.reserve(bundles.size());
    for (const auto& b : bundles) {
        records.push_back(b.record);
        write_feature_matrix(b.visual, out_dir / (b.record.vid + ".visual.fmt1"));
        write_feature_matrix(b.context, out_dir / (b.record.vid + ".context.fmt1"));
    }
    write_manifest(records, out_dir / "manifest.jsonl");

    nlohmann::ordered_json info;
    info["generator"] = "synthetic_world";
    info["seed"] = cfg.seed;
    info["embedding_seed"] = cfg.embedding_seed;
    info["episodes"] = cfg.episodes;
    info["clip_count"] = cfg.clip_count;
    info["clip_seconds"] = cfg.clip_seconds;
    info["visual_dim"] = cfg.visual_dim;
    info["text_dim"] = cfg.text_dim;
    info["noise_sigma"] = cfg.noise_sigma;
    info["context_only_fraction"] = cfg.context_only_fraction;
    std::ofstream out(out_dir / "dataset.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (out_dir / "dataset.json").string());
    out << info.dump(2) << '\n';
}

}  // namespace lmr
