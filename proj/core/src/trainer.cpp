// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "lmr/checkpoint.hpp"
#include "lmr/errors.hpp"
#include "lmr/network.hpp"
#include "lmr/parallel.hpp"
#include "lmr/random.hpp"

namespace lmr {

std::string to_string(OptimizerKind kind) {
    return kind == OptimizerKind::adamw ? "adamw" : "sgd";
}

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "adamw" || name == "adam") return OptimizerKind::adamw;
    if (name == "sgd") return OptimizerKind::sgd;
    throw ConfigError("unknown optimizer '" + name + "' (expected adamw or sgd)");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be >= 0");
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2 for in-batch negatives");
    if (!(grad_clip_norm >= 0.0)) throw ConfigError("grad_clip_norm must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
}

template <typename S>
BasicTrainState<S> init_train_state(const ModelConfig& model, const TrainConfig& cfg) {
    BasicTrainState<S> st;
    st.params = init_params<S>(model, derive_seed({cfg.seed, 0x696e6974ull}));
    st.adam_m.assign(st.params.flat().size(), S(0));
    st.adam_v.assign(st.params.flat().size(), S(0));
    st.seed = cfg.seed;
    return st;
}

namespace {

template <typename S>
struct SampleResult {
    LossBreakdown parts;
    S total = S(0);
    std::vector<S> grad;
    std::uint64_t signature = 0;
};

// Clips whose center lies inside the window.
std::vector<Eigen::Index> clips_in_window(const EpisodeRecord& r, const Window& w) {
    std::vector<Eigen::Index> out;
    for (std::uint32_t i = 0; i < r.clip_count; ++i) {
        const double c = (i + 0.5) * r.clip_seconds;
        if (c >= w.start && c <= w.end) out.push_back(i);
    }
    return out;
}

template <typename S>
SampleResult<S> sample_loss_and_grad(const ModelConfig& model, const ParamStore<S>& params,
                                     const LossWeights& weights, const std::vector<const Sample*>& batch,
                                     std::size_t i, const BatchOptions& options) {
    const Sample& s = *batch[i];
    if (s.record.windows.empty()) throw ValidationError("training sample " + s.record.qid + " has no window");

    Tape<S> tape;
    tape.track_kinks(options.track_kinks);
    ForwardOptions fo;
    fo.training = options.training;
    fo.dropout_seed = derive_seed({options.seed, options.step, fnv1a64(s.record.qid)});
    LmrGraph<S> g(model, params, tape, fo, true);

    const Var words = g.project_text(g.input(s.query));
    const auto enc = g.encode(g.input(s.visual), g.input(s.context), words);
    const auto dec = g.decode(g.moment_queries(words), enc.sequence);

    // Synthetic episodes carry one window; ingested data is supervised by its first.
    const auto [gc, gw] = window_to_span(s.record.windows.front(), s.record.duration);
    const auto ml = moment_loss<S>(tape.value(dec.spans), tape.value(dec.class_logits), S(gc), S(gw), weights);

    std::vector<Var> terms;
    std::vector<S> coeffs;
    terms.push_back(tape.external_scalar(dec.spans, ml.l_mr, ml.d_spans));
    coeffs.push_back(S(weights.mr));
    terms.push_back(tape.external_scalar(dec.class_logits, S(0), ml.d_logits));
    coeffs.push_back(S(weights.mr));

    std::vector<Var> negatives;
    std::vector<S> scores;
    // Negative encodes are skipped entirely when their weight is zero.
    for (std::size_t j = 0; weights.cont != 0.0 && j < batch.size(); ++j) {
        if (j == i) continue;
        const Var other = g.project_text(g.input(batch[j]->query));
        const auto neg = g.encode(g.input(s.visual), g.input(s.context), other);
        negatives.push_back(neg.relevance);
        const auto& r = tape.value(neg.relevance);
        scores.insert(scores.end(), r.data(), r.data() + r.size());
    }
    S l_cont = S(0);
    if (!negatives.empty()) {
        const auto cl = contrastive_loss<S>(scores);
        l_cont = cl.value;
        std::size_t at = 0;
        for (std::size_t n = 0; n < negatives.size(); ++n) {
            const auto cols = tape.value(negatives[n]).cols();
            Mat<S> d = Eigen::Map<const Mat<S>>(cl.d_scores.data() + at, 1, cols);
            at += static_cast<std::size_t>(cols);
            terms.push_back(tape.external_scalar(negatives[n], n == 0 ? cl.value : S(0), std::move(d)));
            coeffs.push_back(S(weights.cont));
        }
    }
    if (weights.positive_saliency) {
        const auto clips = clips_in_window(s.record, s.record.windows.front());
        const auto& rel = tape.value(enc.relevance);
        std::vector<S> pos;
        for (auto c : clips) pos.push_back(rel(0, c));
        const auto pl = positive_saliency_loss<S>(pos);
        Mat<S> d = Mat<S>::Zero(1, rel.cols());
        for (std::size_t n = 0; n < clips.size(); ++n) d(0, clips[n]) = pl.d_scores[n];
        l_cont += pl.value;
        terms.push_back(tape.external_scalar(enc.relevance, pl.value, std::move(d)));
        coeffs.push_back(S(weights.cont));
    }

    const Var root = tape.weighted_sum(terms, coeffs);
    SampleResult<S> out;
    out.total = tape.value(root)(0, 0);
    out.parts = ml.parts;
    out.parts.l_cont = double(l_cont);
    out.parts.total = double(out.total);
    out.grad.assign(params.flat().size(), S(0));
    if (std::isfinite(out.total)) {
        tape.backward(root);
        g.accumulate_grads(out.grad);
    }
    out.signature = derive_seed({tape.kink_signature(), ml.signature});
    return out;
}

}  // namespace

template <typename S>
BatchGradient<S> batch_loss_and_grad(const ModelConfig& model, const ParamStore<S>& params,
                                     const LossWeights& weights, const std::vector<const Sample*>& batch,
                                     const BatchOptions& options) {
    if (batch.empty()) throw ValidationError("empty batch");
    std::vector<SampleResult<S>> results(batch.size());
    parallel_for(batch.size(), thread_budget(options.threads), [&](std::size_t i) {
        results[i] = sample_loss_and_grad<S>(model, params, weights, batch, i, options);
    });

    BatchGradient<S> out;
    out.grad.assign(params.flat().size(), S(0));
    const double inv = 1.0 / double(batch.size());
    for (const auto& r : results) {
        for (std::size_t p = 0; p < out.grad.size(); ++p) out.grad[p] += r.grad[p];
        out.mean.l1 += r.parts.l1 * inv;
        out.mean.giou += r.parts.giou * inv;
        out.mean.ce += r.parts.ce * inv;
        out.mean.l_mr += r.parts.l_mr * inv;
        out.mean.l_cont += r.parts.l_cont * inv;
        out.total += r.total;
        out.signature = derive_seed({out.signature, r.signature});
        out.sample_totals.push_back(r.total);
    }
    const S scale = S(1) / S(batch.size());
    for (auto& v : out.grad) v *= scale;
    out.total *= scale;
    out.mean.total = double(out.total);
    return out;
}

template <typename S>
LossBreakdown train_step(BasicTrainState<S>& state, const ModelConfig& model, const TrainConfig& cfg,
                         const LossWeights& weights, const std::vector<const Sample*>& batch) {
    if (batch.size() < 2) throw ValidationError("train_step needs at least two samples for in-batch negatives");
    BatchOptions bo;
    bo.training = true;
    bo.seed = state.seed;
    bo.step = state.step;
    bo.threads = cfg.threads;
    auto bg = batch_loss_and_grad<S>(model, state.params, weights, batch, bo);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!std::isfinite(bg.sample_totals[i])) {
            throw TrainingError("non-finite loss for qid " + batch[i]->record.qid + " at step " +
                                std::to_string(state.step));
        }
    }

    if (cfg.grad_clip_norm > 0.0) {
        double sq = 0.0;
        for (S v : bg.grad) sq += double(v) * double(v);
        const double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip_norm) {
            const S f = S(cfg.grad_clip_norm / norm);
            for (auto& v : bg.grad) v *= f;
        }
    }

    auto p = state.params.flat();
    const S lr = S(cfg.learning_rate);
    const S decay = S(cfg.learning_rate * cfg.weight_decay);
    ++state.step;
    if (cfg.optimizer == OptimizerKind::adamw) {
        if (state.adam_m.size() != p.size()) state.adam_m.assign(p.size(), S(0));
        if (state.adam_v.size() != p.size()) state.adam_v.assign(p.size(), S(0));
        const S b1 = S(cfg.beta1), b2 = S(cfg.beta2), eps = S(cfg.eps);
        const S c1 = S(1.0 - std::pow(cfg.beta1, double(state.step)));
        const S c2 = S(1.0 - std::pow(cfg.beta2, double(state.step)));
        for (std::size_t i = 0; i < p.size(); ++i) {
            const S gi = bg.grad[i];
            state.adam_m[i] = b1 * state.adam_m[i] + (S(1) - b1) * gi;
            state.adam_v[i] = b2 * state.adam_v[i] + (S(1) - b2) * gi * gi;
            const S mhat = state.adam_m[i] / c1;
            const S vhat = state.adam_v[i] / c2;
            p[i] -= decay * p[i] + lr * mhat / (std::sqrt(vhat) + eps);
        }
    } else {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= decay * p[i] + lr * bg.grad[i];
    }
    return bg.mean;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::uint32_t batch_size, std::uint64_t seed,
                                                    std::uint32_t epoch) {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::mt19937_64 rng(derive_seed({seed, epoch, 0x73687566ull}));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t at = 0; at < n; at += batch_size) {
        const std::size_t end = std::min(n, at + batch_size);
        if (end - at == 1 && !out.empty()) {
            out.back().push_back(order[at]);
        } else {
            out.emplace_back(order.begin() + at, order.begin() + end);
        }
    }
    return out;
}

void write_loss_history(const std::vector<EpochLoss>& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,l1,giou,ce,l_mr,l_cont,total\n";
    char buf[256];
    for (const auto& e : history) {
        const auto& m = e.mean;
        std::snprintf(buf, sizeof buf, "%u,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch, m.l1, m.giou, m.ce, m.l_mr,
                      m.l_cont, m.total);
        out << buf;
    }
    if (!out) throw IoError("failed writing " + path.string());
}

TrainState train(const TrainConfig& cfg, const ModelConfig& model, const LossWeights& weights,
                 const std::vector<Sample>& data, const std::filesystem::path& out_dir,
                 std::optional<TrainState> resume, const TrainHooks& hooks) {
    cfg.validate();
    model.validate();
    weights.validate();
    if (data.size() < 2) throw ValidationError("training needs at least two episodes");

    TrainState state = resume ? std::move(*resume) : init_train_state<float>(model, cfg);
    if (!(state.params.layout() == make_layout(model))) {
        throw ShapeError("resumed parameters do not match the model config");
    }
    if (resume && state.seed != cfg.seed) {
        throw ConfigError("checkpoint was trained with seed " + std::to_string(state.seed) + ", config has " +
                          std::to_string(cfg.seed));
    }
    std::filesystem::create_directories(out_dir);

    for (std::uint32_t epoch = state.epoch + 1; epoch <= cfg.epochs; ++epoch) {
        EpochLoss e;
        e.epoch = epoch;
        for (const auto& idx : epoch_batches(data.size(), cfg.batch_size, cfg.seed, epoch)) {
            std::vector<const Sample*> batch;
            batch.reserve(idx.size());
            for (auto k : idx) batch.push_back(&data[k]);
            const auto parts = train_step(state, model, cfg, weights, batch);
            const double w = double(idx.size()) / double(data.size());
            e.mean.l1 += parts.l1 * w;
            e.mean.giou += parts.giou * w;
            e.mean.ce += parts.ce * w;
            e.mean.l_mr += parts.l_mr * w;
            e.mean.l_cont += parts.l_cont * w;
            e.mean.total += parts.total * w;
        }
        state.epoch = epoch;
        state.loss_history.push_back(e);
        if (hooks.on_epoch) hooks.on_epoch(e);
        if (cfg.eval_every > 0 && epoch % cfg.eval_every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_epoch_%04u.lmrc", epoch);
            save_checkpoint(model, state, out_dir / name);
        }
    }
    save_checkpoint(model, state, out_dir / "model.lmrc");
    write_loss_history(state.loss_history, out_dir / "loss_history.csv");
    return state;
}

template BasicTrainState<float> init_train_state<float>(const ModelConfig&, const TrainConfig&);
template BasicTrainState<double> init_train_state<double>(const ModelConfig&, const TrainConfig&);
template BatchGradient<float> batch_loss_and_grad<float>(const ModelConfig&, const ParamStore<float>&,
                                                         const LossWeights&, const std::vector<const Sample*>&,
                                                         const BatchOptions&);
template BatchGradient<double> batch_loss_and_grad<double>(const ModelConfig&, const ParamStore<double>&,
                                                           const LossWeights&, const std::vector<const Sample*>&,
                                                           const BatchOptions&);
template LossBreakdown train_step<float>(BasicTrainState<float>&, const ModelConfig&, const TrainConfig&,
                                         const LossWeights&, const std::vector<const Sample*>&);
template LossBreakdown train_step<double>(BasicTrainState<double>&, const ModelConfig&, const TrainConfig&,
                                          const LossWeights&, const std::vector<const Sample*>&);

}  // namespace lmr
