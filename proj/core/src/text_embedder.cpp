// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/text_embedder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "lmr/errors.hpp"
#include "lmr/random.hpp"

namespace lmr {

void TextEmbedderConfig::validate() const {
    if (dim == 0) throw ConfigError("text embedder dim must be > 0");
}

std::vector<std::string> tokenize(std::string_view text, const TextEmbedderConfig& cfg) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            flush();
            continue;
        }
        if (cfg.strip_punctuation && std::ispunct(c)) continue;
        current.push_back(cfg.lowercase ? static_cast<char>(std::tolower(c)) : raw);
    }
    flush();
    return tokens;
}

std::vector<float> embed_token(std::string_view token, std::uint32_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed({seed, fnv1a64(token)}));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double norm2 = 0.0;
    for (auto& x : v) {
        x = normal(rng);
        norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    std::vector<float> out(dim);
    for (std::uint32_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] * inv);
    return out;
}

std::vector<float> embed_text(std::string_view text, const TextEmbedderConfig& cfg) {
    cfg.validate();
    std::vector<double> sum(cfg.dim, 0.0);
    for (const auto& tok : tokenize(text, cfg)) {
        const auto v = embed_token(tok, cfg.dim, cfg.seed);
        for (std::uint32_t i = 0; i < cfg.dim; ++i) sum[i] += v[i];
    }
    double norm2 = 0.0;
    for (double x : sum) norm2 += x * x;
    std::vector<float> out(cfg.dim, 0.0f);
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::uint32_t i = 0; i < cfg.dim; ++i) out[i] = static_cast<float>(sum[i] * inv);
    }
    return out;
}

FeatureMatrix embed_query_sequence(std::string_view text, const TextEmbedderConfig& cfg) {
    cfg.validate();
    const auto tokens = tokenize(text, cfg);
    if (tokens.empty()) throw ValidationError("query text has no tokens");
    std::vector<float> data;
    data.reserve(tokens.size() * cfg.dim);
    for (const auto& tok : tokens) {
        const auto v = embed_token(tok, cfg.dim, cfg.seed);
        data.insert(data.end(), v.begin(), v.end());
    }
    return FeatureMatrix(static_cast<std::uint32_t>(tokens.size()), cfg.dim, std::move(data),
                         FeatureRole::query);
}

FeatureMatrix embed_descriptions(std::vector<DescriptionRecord> records,
                                 const TextEmbedderConfig& cfg, std::uint32_t expected_clips) {
    cfg.validate();
    if (records.empty()) throw CoverageError("no description records");
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) { return a.clip_index < b.clip_index; });
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].vid != records.front().vid) {
            throw CoverageError("description records mix videos " + records.front().vid + " and " +
                                records[i].vid);
        }
        if (records[i].clip_index != i) {
            const bool dup = i > 0 && records[i].clip_index == records[i - 1].clip_index;
            throw CoverageError("video " + records.front().vid + ": " +
                                (dup ? "duplicate" : "missing") + " description for clip " +
                                std::to_string(dup ? records[i].clip_index : i));
        }
    }
    if (expected_clips != 0 && records.size() != expected_clips) {
        throw CoverageError("video " + records.front().vid + ": " + std::to_string(records.size()) +
                            " descriptions for " + std::to_string(expected_clips) + " clips");
    }
    std::vector<float> data;
    data.reserve(records.size() * cfg.dim);
    for (const auto& r : records) {
        const auto v = embed_text(r.text, cfg);
        data.insert(data.end(), v.begin(), v.end());
    }
    return FeatureMatrix(static_cast<std::uint32_t>(records.size()), cfg.dim, std::move(data),
                         FeatureRole::context_text);
}

}  // namespace lmr
