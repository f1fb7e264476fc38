// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/dataset.hpp"

#include <fstream>
#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "lmr/errors.hpp"
#include "lmr/parallel.hpp"

namespace lmr {

namespace fs = std::filesystem;

TextEmbedderConfig world_text_config(const WorldConfig& cfg) {
    TextEmbedderConfig t;
    t.dim = cfg.text_dim;
    t.seed = cfg.embedding_seed;
    return t;
}

std::vector<Sample> to_samples(const std::vector<EpisodeBundle>& bundles, const TextEmbedderConfig& text) {
    std::vector<Sample> out;
    out.reserve(bundles.size());
    for (const auto& b : bundles) {
        out.push_back({b.record, b.visual, b.context, embed_query_sequence(b.query_text, text)});
    }
    return out;
}

TextEmbedderConfig dataset_text_config(const fs::path& dir) {
    TextEmbedderConfig t;
    const fs::path info_path = dir / "dataset.json";
    if (!fs::exists(info_path)) return t;
    std::ifstream in(info_path);
    try {
        const auto info = nlohmann::json::parse(in);
        if (info.contains("embedding_seed")) t.seed = info.at("embedding_seed").get<std::uint64_t>();
        if (info.contains("text_dim")) t.dim = info.at("text_dim").get<std::uint32_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(info_path.string() + ": " + e.what());
    }
    t.validate();
    return t;
}

namespace {

void check_rows(const FeatureMatrix& m, const EpisodeRecord& r, const char* stream) {
    if (m.rows() != r.clip_count) {
        throw ShapeError(std::string(stream) + " stream of " + r.vid + " has " + std::to_string(m.rows()) +
                         " rows, manifest says " + std::to_string(r.clip_count) + " clips");
    }
}

}  // namespace

std::vector<Sample> load_dataset(const fs::path& dir, const DatasetOptions& options) {
    const fs::path manifest = dir / "manifest.jsonl";
    if (!fs::exists(manifest)) throw IoError("no manifest.jsonl in " + dir.string());
    const auto records = load_manifest(manifest);
    const TextEmbedderConfig text = options.text ? *options.text : dataset_text_config(dir);

    std::map<std::string, std::vector<DescriptionRecord>> descriptions;
    if (fs::exists(dir / "descriptions.jsonl")) {
        for (auto& d : load_descriptions(dir / "descriptions.jsonl")) descriptions[d.vid].push_back(std::move(d));
    }

    std::vector<Sample> out(records.size());
    parallel_for(records.size(), thread_budget(options.threads), [&](std::size_t i) {
        const EpisodeRecord& r = records[i];
        Sample s;
        s.record = r;
        s.visual = read_feature_matrix(dir / (r.vid + ".visual.fmt1"), FeatureRole::visual);
        const fs::path ctx = dir / (r.vid + ".context.fmt1");
        if (fs::exists(ctx)) {
            s.context = read_feature_matrix(ctx, FeatureRole::context_text);
        } else if (auto it = descriptions.find(r.vid); it != descriptions.end()) {
            s.context = embed_descriptions(it->second, text, r.clip_count);
        } else {
            throw IoError("no context features or descriptions for " + r.vid + " in " + dir.string());
        }
        const fs::path q = dir / (r.qid + ".query.fmt1");
        s.query = fs::exists(q) ? read_feature_matrix(q, FeatureRole::query) : embed_query_sequence(r.query, text);
        check_rows(s.visual, r, "visual");
        check_rows(s.context, r, "context");
        out[i] = std::move(s);
    });
    return out;
}

void ablate_context(std::vector<Sample>& samples) {
    for (auto& s : samples) s.context = FeatureMatrix::zeros(s.context.rows(), s.context.cols(), FeatureRole::context_text);
}

std::vector<Sample> filter_samples(const std::vector<Sample>& samples, const std::vector<EpisodeRecord>& keep) {
    std::set<std::string> qids;
    for (const auto& r : keep) qids.insert(r.qid);
    std::vector<Sample> out;
    for (const auto& s : samples) {
        if (qids.count(s.record.qid)) out.push_back(s);
    }
    return out;
}

}  // namespace lmr
