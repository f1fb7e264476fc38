// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/network.hpp"


#include <cmath>
#include <string>

#include "lmr/errors.hpp"

namespace lmr {

namespace {

enum StreamType : Eigen::Index { kSaliencyType = 0, kVisualType = 1, kContextType = 2 };

}  // namespace

template <typename S>
LmrGraph<S>::LmrGraph(const ModelConfig& cfg, const ParamStore<S>& params, Tape<S>& tape,
                      ForwardOptions options, bool params_require_grad)
    : cfg_(cfg),
      params_(params),
      tape_(tape),
      options_(options),
      params_require_grad_(params_require_grad),
      dropout_rng_(options.dropout_seed) {
    cfg_.validate();
    if (!(params_.layout() == make_layout(cfg_))) {
        throw ShapeError("parameter layout does not match model config");
    }
}

template <typename S>
Var LmrGraph<S>::input(const FeatureMatrix& m) {
    Mat<S> v(m.rows(), m.cols());
    const auto data = m.data();
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<S>(data[i]);
    return tape_.constant(std::move(v));
}

template <typename S>
Var LmrGraph<S>::input(const Mat<S>& m) {
    return tape_.constant(m);
}

template <typename S>
Var LmrGraph<S>::param(std::string_view name) {
    const std::size_t index = params_.layout().index(name);
    if (auto it = bound_.find(index); it != bound_.end()) return it->second;
    Mat<S> value = params_.view(index);
    const Var v = params_require_grad_ ? tape_.variable(std::move(value)) : tape_.constant(std::move(value));
    bound_.emplace(index, v);
    return v;
}

template <typename S>
Var LmrGraph<S>::lin(const std::string& prefix, Var x) {
    return tape_.linear(x, param(prefix + ".w"), param(prefix + ".b"));
}

template <typename S>
Var LmrGraph<S>::norm(const std::string& prefix, Var x) {
    return tape_.layer_norm(x, param(prefix + ".g"), param(prefix + ".b"));
}

template <typename S>
Var LmrGraph<S>::dropout(Var x) {
    if (!options_.training || cfg_.dropout <= 0.0) return x;
    const auto& v = tape_.value(x);
    Mat<S> keep(v.rows(), v.cols());
    std::bernoulli_distribution coin(1.0 - cfg_.dropout);
    const S scale = S(1) / S(1.0 - cfg_.dropout);
    for (Eigen::Index i = 0; i < keep.size(); ++i) keep.data()[i] = coin(dropout_rng_) ? scale : S(0);
    return tape_.mask(x, std::move(keep));
}

template <typename S>
AttentionMaps<S>* LmrGraph<S>::slot(std::vector<AttentionMaps<S>>* record) {
    if (!record) return nullptr;
    record->emplace_back();
    return &record->back();
}

template <typename S>
Var LmrGraph<S>::attend(const std::string& prefix, Var queries, Var keys, AttentionMaps<S>* maps) {
    const Var q = lin(prefix + ".q", queries);
    const Var k = lin(prefix + ".k", keys);
    const Var v = lin(prefix + ".v", keys);
    const Var a = tape_.attention(q, k, v, static_cast<int>(cfg_.heads), maps);
    return lin(prefix + ".o", a);
}

template <typename S>
Var LmrGraph<S>::ffn_block(const std::string& prefix, Var x, const std::string& norm_name) {
    const Var h = tape_.relu(lin(prefix + ".ffn1", x));
    const Var y = dropout(lin(prefix + ".ffn2", h));
    return norm(prefix + "." + norm_name, tape_.add(x, y));
}

template <typename S>
Var LmrGraph<S>::self_attention_block(const std::string& prefix, Var x,
                                      std::vector<AttentionMaps<S>>* record) {
    const Var a = dropout(attend(prefix + ".attn", x, x, slot(record)));
    const Var h = norm(prefix + ".norm1", tape_.add(x, a));
    return ffn_block(prefix, h, "norm2");
}

template <typename S>
Var LmrGraph<S>::project_visual(Var raw) {
    return lin("proj.visual", raw);
}

template <typename S>
Var LmrGraph<S>::project_text(Var raw) {
    return lin("proj.text", raw);
}

template <typename S>
Var LmrGraph<S>::add_clip_positions(Var stream) {
    if (!cfg_.clip_positions) return stream;
    const auto& v = tape_.value(stream);
    return tape_.add(stream, tape_.constant(sinusoidal_positions<S>(v.rows(), v.cols())));
}

template <typename S>
Var LmrGraph<S>::vqf(Var stream, Var words, std::vector<AttentionMaps<S>>* record) {
    if (tape_.value(stream).rows() < 1) throw ShapeError("vqf: empty stream");
    if (tape_.value(words).rows() < 1) throw ShapeError("vqf: empty query");
    Var x = stream;
    for (std::uint32_t l = 0; l < cfg_.vqf_layers; ++l) {
        const std::string p = "vqf." + std::to_string(l);
        const Var q = lin(p + ".q", x);
        const Var k = lin(p + ".k", words);
        const Var v = lin(p + ".v", words);
        const Var a = tape_.attention(q, k, v, static_cast<int>(cfg_.heads), slot(record));
        const Var m = dropout(lin(p + ".mlp2", tape_.relu(lin(p + ".mlp1", a))));
        x = norm(p + ".norm", tape_.add(x, m));
    }
    return x;
}

template <typename S>
Var LmrGraph<S>::relevance(Var sequence, Eigen::Index video_tokens) {
    const Var token = tape_.slice_rows(sequence, 0, 1);
    const Var video = tape_.slice_rows(sequence, 1, video_tokens);
    const Var u = lin("saliency.ws", token);
    const Var v = lin("saliency.wv", video);
    // u is 1 x d; replicate so the row-wise dot gives one score per clip.
    const Var ur = tape_.repeat_rows(u, video_tokens);
    return tape_.rowwise_dot(ur, v, S(1) / std::sqrt(S(cfg_.hidden_dim)));
}

template <typename S>
typename LmrGraph<S>::Encoded LmrGraph<S>::encode(Var visual, Var context, Var words) {
    const Eigen::Index nv = tape_.value(visual).rows();
    const Eigen::Index nt = tape_.value(context).rows();
    if (nv < 1 || nt < 1) throw ShapeError("encode: empty video stream");
    const bool rec = options_.record_attention;

    const Var pv = add_clip_positions(project_visual(visual));
    const Var pt = add_clip_positions(project_text(context));
    Encoded e;
    e.fused_visual = vqf(pv, words, rec ? &attention_.vqf_visual : nullptr);
    e.fused_context = vqf(pt, words, rec ? &attention_.vqf_context : nullptr);

    const Var types = param("vcm.stream_type");
    const Var token = tape_.add(param("vcm.saliency_token"), tape_.slice_rows(types, kSaliencyType, 1));
    const Var vis = tape_.add_row(e.fused_visual, tape_.slice_rows(types, kVisualType, 1));
    const Var ctx = tape_.add_row(e.fused_context, tape_.slice_rows(types, kContextType, 1));
    Var x = tape_.concat_rows({token, vis, ctx});
    for (std::uint32_t l = 0; l < cfg_.vcm_layers; ++l) {
        x = self_attention_block("vcm." + std::to_string(l), x, rec ? &attention_.vcm : nullptr);
    }
    e.sequence = x;
    e.relevance = relevance(x, nv);
    return e;
}

template <typename S>
Var LmrGraph<S>::moment_queries(Var words) {
    const Var pooled = tape_.mean_rows(words);
    return tape_.add(tape_.repeat_rows(pooled, cfg_.k_moment_queries), param("decoder.query_pos"));
}

template <typename S>
typename LmrGraph<S>::Decoded LmrGraph<S>::decode(Var queries, Var sequence) {
    const bool rec = options_.record_attention;
    Var x = queries;
    for (std::uint32_t l = 0; l < cfg_.decoder_layers; ++l) {
        const std::string p = "decoder." + std::to_string(l);
        const Var s = dropout(attend(p + ".self", x, x, nullptr));
        x = norm(p + ".norm1", tape_.add(x, s));
        const Var c = dropout(attend(p + ".cross", x, sequence, slot(rec ? &attention_.decoder_cross : nullptr)));
        x = norm(p + ".norm2", tape_.add(x, c));
        x = ffn_block(p, x, "norm3");
    }
    Decoded d;
    d.hidden = x;
    d.spans = tape_.sigmoid(lin("head.span2", tape_.relu(lin("head.span1", x))));
    d.class_logits = lin("head.class", x);
    return d;
}

template <typename S>
void LmrGraph<S>::accumulate_grads(std::span<S> flat_grad) const {
    for (const auto& [index, var] : bound_) {
        const auto& g = tape_.grad(var);
        if (g.size() == 0) continue;
        const ParamInfo& p = params_.layout().at(index);
        for (std::size_t i = 0; i < p.size(); ++i) flat_grad[p.offset + i] += g.data()[i];
    }
}

template <typename S>
Mat<S> sinusoidal_positions(Eigen::Index rows, Eigen::Index dim) {
    Mat<S> pe(rows, dim);
    for (Eigen::Index pos = 0; pos < rows; ++pos) {
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double freq = std::pow(10000.0, -double(2 * (i / 2)) / double(dim));
            const double angle = double(pos) * freq;
            pe(pos, i) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    }
    return pe;
}

template <typename S>
Mat<S> cross_attention(const Mat<S>& q, const Mat<S>& k, const Mat<S>& v) {
    if (q.cols() != k.cols() || k.rows() != v.rows() || q.cols() == 0) {
        throw ShapeError("cross_attention: incompatible shapes");
    }
    if (k.rows() == 0) throw ShapeError("cross_attention: empty key set");
    Mat<S> scores = q * k.transpose() / std::sqrt(S(q.cols()));
    Tape<S>::softmax_rows_inplace(scores);
    return scores * v;
}

template <typename S>
S relevance_score(std::span<const S> saliency_proj, std::span<const S> video_proj) {
    if (saliency_proj.size() != video_proj.size() || saliency_proj.empty()) {
        throw ShapeError("relevance_score: projected vectors differ in size");
    }
    S dot = S(0);
    for (std::size_t i = 0; i < saliency_proj.size(); ++i) dot += saliency_proj[i] * video_proj[i];
    return dot / std::sqrt(S(saliency_proj.size()));
}

template <typename S>
BasicForwardOutput<S> forward(const ModelConfig& cfg, const ParamStore<S>& params,
                              const FeatureMatrix& visual, const FeatureMatrix& context,
                              const FeatureMatrix& query, const ForwardOptions& options) {
    if (visual.cols() != cfg.visual_dim) throw ShapeError("visual features have wrong width");
    if (context.cols() != cfg.text_dim || query.cols() != cfg.text_dim) {
        throw ShapeError("text features have wrong width");
    }
    if (visual.rows() != context.rows()) {
        throw ShapeError("visual and context streams disagree on clip count");
    }
    Tape<S> tape;
    LmrGraph<S> g(cfg, params, tape, options, /*params_require_grad=*/false);
    const Var words = g.project_text(g.input(query));
    const auto enc = g.encode(g.input(visual), g.input(context), words);
    const auto dec = g.decode(g.moment_queries(words), enc.sequence);

    BasicForwardOutput<S> out;
    const auto& rel = tape.value(enc.relevance);
    out.relevance.assign(rel.data(), rel.data() + rel.size());
    out.encoder_seq = tape.value(enc.sequence);
    out.decoder_out = tape.value(dec.hidden);
    out.moments = tape.value(dec.spans);
    out.class_logits = tape.value(dec.class_logits);
    if (options.record_attention) out.attentions = g.attention();
    return out;
}

template class LmrGraph<float>;
template class LmrGraph<double>;
template Mat<float> sinusoidal_positions<float>(Eigen::Index, Eigen::Index);
template Mat<double> sinusoidal_positions<double>(Eigen::Index, Eigen::Index);
template Mat<float> cross_attention<float>(const Mat<float>&, const Mat<float>&, const Mat<float>&);
template Mat<double> cross_attention<double>(const Mat<double>&, const Mat<double>&, const Mat<double>&);
template float relevance_score<float>(std::span<const float>, std::span<const float>);
template double relevance_score<double>(std::span<const double>, std::span<const double>);
template BasicForwardOutput<float> forward<float>(const ModelConfig&, const ParamStore<float>&,
                                                  const FeatureMatrix&, const FeatureMatrix&,
                                                  const FeatureMatrix&, const ForwardOptions&);
template BasicForwardOutput<double> forward<double>(const ModelConfig&, const ParamStore<double>&,
                                                    const FeatureMatrix&, const FeatureMatrix&,
                                                    const FeatureMatrix&, const ForwardOptions&);

}  // namespace lmr
