// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch training with in-batch negatives. Every sample contributes
//   lambda_mr * l_mr(own query) + lambda_cont * l_cont(all other batch queries)
// and the batch objective is the mean over samples.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lmr/dataset.hpp"
#include "lmr/model_config.hpp"
#include "lmr/objectives.hpp"
#include "lmr/params.hpp"

namespace lmr {

enum class OptimizerKind : std::uint8_t { adamw, sgd };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
    double learning_rate = 1e-4;
    double weight_decay = 1e-4;
    std::uint32_t batch_size = 32;
    std::uint32_t epochs = 200;
    std::uint64_t seed = 0;
    double grad_clip_norm = 0.0;  // 0 disables clipping
    std::uint32_t eval_every = 0;  // periodic checkpoint interval in epochs, 0 = final only
    std::size_t threads = 1;
    OptimizerKind optimizer = OptimizerKind::adamw;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

struct EpochLoss {
    std::uint32_t epoch = 0;  // 1-based
    LossBreakdown mean;
};

template <typename S>
struct BasicTrainState {
    ParamStore<S> params;
    std::vector<S> adam_m;
    std::vector<S> adam_v;
    std::uint64_t step = 0;
    std::uint32_t epoch = 0;  // completed epochs
    std::uint64_t seed = 0;
    std::vector<EpochLoss> loss_history;
};

using TrainState = BasicTrainState<float>;

// Parameters drawn from the training seed; zero moments.
template <typename S>
BasicTrainState<S> init_train_state(const ModelConfig& model, const TrainConfig& cfg);

struct BatchOptions {
    bool training = true;       // enables dropout
    std::uint64_t seed = 0;     // dropout streams derive from (seed, step, qid)
    std::uint64_t step = 0;
    std::size_t threads = 1;
    bool track_kinks = false;
};

template <typename S>
struct BatchGradient {
    LossBreakdown mean;        // averaged over the batch
    S total = S(0);
    std::vector<S> grad;       // d(total) / d(params)
    std::uint64_t signature = 0;  // branch pattern, valid when track_kinks
    std::vector<S> sample_totals;
};

// Loss and gradient of the batch objective; per-sample work may run on
// several threads and is reduced in sample order.
template <typename S>
BatchGradient<S> batch_loss_and_grad(const ModelConfig& model, const ParamStore<S>& params,
                                     const LossWeights& weights, const std::vector<const Sample*>& batch,
                                     const BatchOptions& options);

// One optimizer update. Throws TrainingError naming the qid of a sample whose
// loss is not finite.
template <typename S>
LossBreakdown train_step(BasicTrainState<S>& state, const ModelConfig& model, const TrainConfig& cfg,
                         const LossWeights& weights, const std::vector<const Sample*>& batch);

// Epoch partition: shuffled indices cut into batch_size groups; a trailing
// group of one joins the previous batch.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::uint32_t batch_size, std::uint64_t seed,
                                                    std::uint32_t epoch);

struct TrainHooks {
    std::function<void(const EpochLoss&)> on_epoch;
};

// Trains from `resume` (or a fresh state) up to cfg.epochs. Writes
// {out}/model.lmrc at the end, {out}/checkpoint_epoch_NNNN.lmrc every
// eval_every epochs and {out}/loss_history.csv.
TrainState train(const TrainConfig& cfg, const ModelConfig& model, const LossWeights& weights,
                 const std::vector<Sample>& data, const std::filesystem::path& out_dir,
                 std::optional<TrainState> resume = std::nullopt, const TrainHooks& hooks = {});

void write_loss_history(const std::vector<EpochLoss>& history, const std::filesystem::path& path);

}  // namespace lmr
