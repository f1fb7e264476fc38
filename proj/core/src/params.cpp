// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/params.hpp"


#include <algorithm>
#include <cmath>
#include <random>

#include "lmr/errors.hpp"
#include "lmr/random.hpp"

namespace lmr {

void ModelConfig::validate() const {
    if (hidden_dim == 0 || heads == 0 || hidden_dim % heads != 0) {
        throw ConfigError("hidden_dim must be a positive multiple of heads");
    }
    if (vqf_layers < 1 || vcm_layers < 1 || decoder_layers < 1) {
        throw ConfigError("every layer count must be >= 1");
    }
    if (k_moment_queries < 1) throw ConfigError("k_moment_queries must be >= 1");
    if (visual_dim == 0 || text_dim == 0) throw ConfigError("input dims must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (ffn_expansion == 0) throw ConfigError("ffn_expansion must be >= 1");
}

ModelConfig tiny_model_config() {
    ModelConfig c;
    c.hidden_dim = 8;
    c.heads = 2;
    c.vqf_layers = 1;
    c.vcm_layers = 1;
    c.decoder_layers = 1;
    c.k_moment_queries = 2;
    c.visual_dim = 6;
    c.text_dim = 6;
    c.dropout = 0.0;
    return c;
}

std::size_t ParamLayout::add(std::string name, std::uint32_t rows, std::uint32_t cols) {
    if (by_name_.count(name)) throw ShapeError("duplicate parameter " + name);
    by_name_.emplace(name, params_.size());
    params_.push_back({std::move(name), rows, cols, total_});
    total_ += std::size_t(rows) * cols;
    return params_.size() - 1;
}

std::size_t ParamLayout::index(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) throw ShapeError("unknown parameter " + std::string(name));
    return it->second;
}

bool ParamLayout::contains(std::string_view name) const {
    return by_name_.count(std::string(name)) != 0;
}

const ParamInfo& ParamLayout::owner(std::size_t flat_index) const {
    auto it = std::upper_bound(params_.begin(), params_.end(), flat_index,
                               [](std::size_t i, const ParamInfo& p) { return i < p.offset; });
    if (it == params_.begin() || flat_index >= total_) throw ShapeError("flat index out of range");
    return *std::prev(it);
}

bool operator==(const ParamLayout& a, const ParamLayout& b) {
    if (a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i) {
        const auto &x = a.params_[i], &y = b.params_[i];
        if (x.name != y.name || x.rows != y.rows || x.cols != y.cols) return false;
    }
    return true;
}

namespace {

void add_linear(ParamLayout& l, const std::string& prefix, std::uint32_t in, std::uint32_t out) {
    l.add(prefix + ".w", in, out);
    l.add(prefix + ".b", 1, out);
}

void add_norm(ParamLayout& l, const std::string& prefix, std::uint32_t d) {
    l.add(prefix + ".g", 1, d);
    l.add(prefix + ".b", 1, d);
}

void add_attention(ParamLayout& l, const std::string& prefix, std::uint32_t d) {
    add_linear(l, prefix + ".q", d, d);
    add_linear(l, prefix + ".k", d, d);
    add_linear(l, prefix + ".v", d, d);
    add_linear(l, prefix + ".o", d, d);
}

}  // namespace

ParamLayout make_layout(const ModelConfig& cfg) {
    cfg.validate();
    const std::uint32_t d = cfg.hidden_dim, f = cfg.ffn_dim();
    ParamLayout l;
    add_linear(l, "proj.visual", cfg.visual_dim, d);
    add_linear(l, "proj.text", cfg.text_dim, d);
    for (std::uint32_t i = 0; i < cfg.vqf_layers; ++i) {
        const std::string p = "vqf." + std::to_string(i);
        add_linear(l, p + ".q", d, d);
        add_linear(l, p + ".k", d, d);
        add_linear(l, p + ".v", d, d);
        add_linear(l, p + ".mlp1", d, f);
        add_linear(l, p + ".mlp2", f, d);
        add_norm(l, p + ".norm", d);
    }
    l.add("vcm.saliency_token", 1, d);
    l.add("vcm.stream_type", 3, d);
    for (std::uint32_t i = 0; i < cfg.vcm_layers; ++i) {
        const std::string p = "vcm." + std::to_string(i);
        add_attention(l, p + ".attn", d);
        add_norm(l, p + ".norm1", d);
        add_linear(l, p + ".ffn1", d, f);
        add_linear(l, p + ".ffn2", f, d);
        add_norm(l, p + ".norm2", d);
    }
    add_linear(l, "saliency.ws", d, d);
    add_linear(l, "saliency.wv", d, d);
    l.add("decoder.query_pos", cfg.k_moment_queries, d);
    for (std::uint32_t i = 0; i < cfg.decoder_layers; ++i) {
        const std::string p = "decoder." + std::to_string(i);
        add_attention(l, p + ".self", d);
        add_norm(l, p + ".norm1", d);
        add_attention(l, p + ".cross", d);
        add_norm(l, p + ".norm2", d);
        add_linear(l, p + ".ffn1", d, f);
        add_linear(l, p + ".ffn2", f, d);
        add_norm(l, p + ".norm3", d);
    }
    add_linear(l, "head.span1", d, d);
    add_linear(l, "head.span2", d, 2);
    add_linear(l, "head.class", d, 2);
    return l;
}

template <typename S>
void ParamStore<S>::unflatten(std::span<const S> flat) {
    if (flat.size() != data_.size()) {
        throw ShapeError("unflatten: expected " + std::to_string(data_.size()) + " values, got " +
                         std::to_string(flat.size()));
    }
    std::copy(flat.begin(), flat.end(), data_.begin());
}

template <typename S>
ParamStore<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ParamStore<S> store(make_layout(cfg));
    const auto& layout = store.layout();
    for (std::size_t i = 0; i < layout.params().size(); ++i) {
        const ParamInfo& p = layout.at(i);
        std::mt19937_64 rng(derive_seed({seed, fnv1a64(p.name)}));
        auto view = store.view(i);
        const auto ends_with = [&](std::string_view suffix) {
            return p.name.size() >= suffix.size() &&
                   p.name.compare(p.name.size() - suffix.size(), suffix.size(), suffix) == 0;
        };
        const bool norm = p.name.find(".norm") != std::string::npos;
        if (norm && ends_with(".g")) {
            view.setOnes();
        } else if (ends_with(".b")) {
            view.setZero();
        } else if (ends_with(".w")) {
            const double a = std::sqrt(6.0 / double(p.rows + p.cols));
            std::uniform_real_distribution<double> u(-a, a);
            for (Eigen::Index r = 0; r < view.rows(); ++r)
                for (Eigen::Index c = 0; c < view.cols(); ++c) view(r, c) = static_cast<S>(u(rng));
        } else {
            std::normal_distribution<double> n(0.0, 0.5);
            for (Eigen::Index r = 0; r < view.rows(); ++r)
                for (Eigen::Index c = 0; c < view.cols(); ++c) view(r, c) = static_cast<S>(n(rng));
        }
    }
    return store;
}

template <typename S>
void check_finite(const ParamStore<S>& params) {
    const auto flat = params.flat();
    for (std::size_t i = 0; i < flat.size(); ++i) {
        if (!std::isfinite(flat[i])) {
            throw ValidationError("non-finite value in parameter " + params.layout().owner(i).name);
        }
    }
}

template class ParamStore<float>;
template class ParamStore<double>;
template ParamStore<float> init_params<float>(const ModelConfig&, std::uint64_t);
template ParamStore<double> init_params<double>(const ModelConfig&, std::uint64_t);
template void check_finite<float>(const ParamStore<float>&);
template void check_finite<double>(const ParamStore<double>&);

}  // namespace lmr
