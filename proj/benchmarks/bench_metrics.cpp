// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "lmr/metrics.hpp"

namespace {

// Random predictions against single-window ground truth.
struct Instance {
    std::vector<lmr::RankedPredictions> predictions;
    std::vector<lmr::EpisodeRecord> manifest;
};

Instance make_instance(std::size_t queries, std::size_t k) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    Instance out;
    for (std::size_t q = 0; q < queries; ++q) {
        lmr::EpisodeRecord r;
        r.qid = "q" + std::to_string(q);
        r.vid = "v" + std::to_string(q);
        r.duration = 100.0;
        const double a = u(rng), c = u(rng);
        r.windows = {{std::min(a, c), std::max(a, c) + 1.0}};
        lmr::RankedPredictions p;
        p.qid = r.qid;
        for (std::size_t j = 0; j < k; ++j) {
            const double s = u(rng), e = u(rng);
            p.moments.push_back({std::min(s, e), std::max(s, e) + 0.5, 1.0 / double(j + 1)});
        }
        out.manifest.push_back(r);
        out.predictions.push_back(std::move(p));
    }
    return out;
}

void bm_evaluate(benchmark::State& state) {
    const auto inst = make_instance(static_cast<std::size_t>(state.range(0)), 10);
    for (auto _ : state) benchmark::DoNotOptimize(lmr::evaluate(inst.predictions, inst.manifest));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_evaluate)->Arg(200)->Arg(2000);

}  // namespace
