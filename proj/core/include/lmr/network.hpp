// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0
//
// The differentiable moment-retrieval network, expressed as operations on a
// Tape:
//
//   visual, context --project--> + clip positions --VQF(query words)--> fused
//   [saliency token; fused visual; fused context] --VCM self-attention--> F_m
//   relevance S_i = (w_s x_s) . (w_v x_i) / sqrt(d) for every video token
//   pooled query words + learned positions --decoder(F_m)--> k moment slots
//   slots --MLP + logistic--> (center, width); slots --linear--> fg/bg logits

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lmr/feature_matrix.hpp"
#include "lmr/model_config.hpp"
#include "lmr/params.hpp"
#include "lmr/tape.hpp"

namespace lmr {

struct ForwardOptions {
    bool training = false;  // dropout is active only in training mode
    std::uint64_t dropout_seed = 0;
    bool record_attention = false;
};

template <typename S>
struct NetworkAttention {
    std::vector<AttentionMaps<S>> vqf_visual;   // per VQF layer: clips x words
    std::vector<AttentionMaps<S>> vqf_context;  // per VQF layer: clips x words
    std::vector<AttentionMaps<S>> vcm;          // per VCM layer: seq x seq
    std::vector<AttentionMaps<S>> decoder_cross;  // per decoder layer: k x seq
};

template <typename S>
class LmrGraph {
public:
    struct Encoded {
        Var fused_visual;   // N^v x d
        Var fused_context;  // N^t x d
        Var sequence;       // F_m, (1 + N^v + N^t) x d
        Var relevance;      // 1 x N^v
    };
    struct Decoded {
        Var hidden;        // H, k x d
        Var spans;         // k x 2, (center, width) in (0, 1)
        Var class_logits;  // k x 2, column 0 = foreground
    };

    LmrGraph(const ModelConfig& cfg, const ParamStore<S>& params, Tape<S>& tape,
             ForwardOptions options = {}, bool params_require_grad = true);

    Tape<S>& tape() { return tape_; }
    const ModelConfig& config() const { return cfg_; }

    Var input(const FeatureMatrix& m);
    Var input(const Mat<S>& m);
    Var param(std::string_view name);

    Var project_visual(Var raw);
    Var project_text(Var raw);
    Var add_clip_positions(Var stream);

    // One shared stack of query-conditioned cross-attention blocks:
    //   out = LayerNorm(stream + MLP(Attn(stream W_q, words W_k, words W_v)))
    Var vqf(Var stream, Var words, std::vector<AttentionMaps<S>>* record = nullptr);

    // visual/context are raw features, words the projected query tokens.
    Encoded encode(Var visual, Var context, Var words);
    // Relevance head only, for already-encoded sequences.
    Var relevance(Var sequence, Eigen::Index video_tokens);

    Var moment_queries(Var words);
    Decoded decode(Var queries, Var sequence);

    // Adds d(root)/d(param) of every parameter touched by this graph into
    // `flat_grad` (laid out like ParamStore::flat()).
    void accumulate_grads(std::span<S> flat_grad) const;

    const NetworkAttention<S>& attention() const { return attention_; }

private:
    Var self_attention_block(const std::string& prefix, Var x, std::vector<AttentionMaps<S>>* record);
    Var ffn_block(const std::string& prefix, Var x, const std::string& norm);
    Var attend(const std::string& prefix, Var queries, Var keys, AttentionMaps<S>* maps);
    Var lin(const std::string& prefix, Var x);
    Var norm(const std::string& prefix, Var x);
    Var dropout(Var x);
    AttentionMaps<S>* slot(std::vector<AttentionMaps<S>>* record);

    const ModelConfig& cfg_;
    const ParamStore<S>& params_;
    Tape<S>& tape_;
    ForwardOptions options_;
    bool params_require_grad_;
    std::mt19937_64 dropout_rng_;
    std::unordered_map<std::size_t, Var> bound_;
    NetworkAttention<S> attention_;
};

// Fixed sinusoidal encoding of clip indices 0..rows-1.
template <typename S>
Mat<S> sinusoidal_positions(Eigen::Index rows, Eigen::Index dim);

// Single-head softmax(q k^T / sqrt(d)) v, the plain-matrix reference for the
// attention primitive.
template <typename S>
Mat<S> cross_attention(const Mat<S>& q, const Mat<S>& k, const Mat<S>& v);

// Relevance of one clip: (u . v) / sqrt(d) where u, v are the projected
// saliency and video tokens.
template <typename S>
S relevance_score(std::span<const S> saliency_proj, std::span<const S> video_proj);

template <typename S>
struct BasicForwardOutput {
    std::vector<S> relevance;  // S_i per clip
    Mat<S> encoder_seq;        // F_m
    Mat<S> decoder_out;        // H
    Mat<S> moments;            // k x (center, width), normalized
    Mat<S> class_logits;       // k x (fg, bg)
    std::optional<NetworkAttention<S>> attentions;
};

using ForwardOutput = BasicForwardOutput<float>;

// Pure function of (inputs, params); throws ShapeError on inconsistent inputs.
template <typename S>
BasicForwardOutput<S> forward(const ModelConfig& cfg, const ParamStore<S>& params,
                              const FeatureMatrix& visual, const FeatureMatrix& context,
                              const FeatureMatrix& query, const ForwardOptions& options = {});

}  // namespace lmr
