// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "lmr/dataset.hpp"
#include "lmr/network.hpp"
#include "lmr/synthetic_world.hpp"
#include "lmr/trainer.hpp"

namespace {

struct Bench {
    lmr::WorldConfig world;
    lmr::ModelConfig model;
    lmr::ModelParams params;
    std::vector<lmr::Sample> samples;

    explicit Bench(std::uint32_t hidden) {
        world.episodes = 16;
        model.hidden_dim = hidden;
        model.dropout = 0.0;
        params = lmr::init_params<float>(model, 1);
        std::vector<lmr::EpisodeBundle> bundles;
        for (std::uint32_t i = 0; i < world.episodes; ++i) bundles.push_back(lmr::generate_episode(world, i));
        samples = lmr::to_samples(bundles, lmr::world_text_config(world));
    }
};

void bm_forward(benchmark::State& state) {
    const Bench b(static_cast<std::uint32_t>(state.range(0)));
    const auto& s = b.samples.front();
    for (auto _ : state) {
        benchmark::DoNotOptimize(lmr::forward<float>(b.model, b.params, s.visual, s.context, s.query));
    }
}
BENCHMARK(bm_forward)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void bm_batch_gradient(benchmark::State& state) {
    const Bench b(static_cast<std::uint32_t>(state.range(0)));
    std::vector<const lmr::Sample*> batch;
    for (const auto& s : b.samples) batch.push_back(&s);
    lmr::LossWeights weights;
    weights.cont = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(lmr::batch_loss_and_grad<float>(b.model, b.params, weights, batch, {}));
    }
    state.SetItemsProcessed(state.iterations() * std::int64_t(batch.size()));
}
BENCHMARK(bm_batch_gradient)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
