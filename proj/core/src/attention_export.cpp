// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/attention_export.hpp"

#include <cstdio>
#include <fstream>

#include "lmr/errors.hpp"

namespace lmr {

Mat<double> word_to_clip_attention(const AttentionMaps<float>& maps, std::size_t head) {
    if (head >= maps.logits.size()) throw ShapeError("attention head out of range");
    Mat<double> t = maps.logits[head].cast<double>().transpose();
    Tape<double>::softmax_rows_inplace(t);
    return t;
}

AttentionProfile context_attention_profile(const ForwardOutput& fwd) {
    if (!fwd.attentions) throw StateError("attention was not recorded for this forward pass");
    AttentionProfile out;
    for (const auto& layer : fwd.attentions->vqf_context) {
        const std::size_t heads = layer.logits.size();
        if (heads == 0) throw StateError("empty attention record");
        const Eigen::Index clips = layer.logits[0].rows();
        std::vector<double> mass(static_cast<std::size_t>(clips), 0.0);
        for (std::size_t h = 0; h < heads; ++h) {
            const Mat<double> a = word_to_clip_attention(layer, h);
            const double w = 1.0 / double(heads * std::size_t(a.rows()));
            for (Eigen::Index c = 0; c < clips; ++c) mass[c] += a.col(c).sum() * w;
        }
        out.layers.push_back(std::move(mass));
    }
    return out;
}

void export_attention(const ForwardOutput& fwd, const std::filesystem::path& path) {
    const auto profile = context_attention_profile(fwd);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "layer,clip_index,attention\n";
    char buf[96];
    for (std::size_t l = 0; l < profile.layers.size(); ++l) {
        for (std::size_t c = 0; c < profile.layers[l].size(); ++c) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g\n", l, c, profile.layers[l][c]);
            out << buf;
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace lmr
