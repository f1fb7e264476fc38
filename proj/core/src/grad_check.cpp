// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lmr/errors.hpp"
#include "lmr/params.hpp"
#include "lmr/random.hpp"
#include "lmr/synthetic_world.hpp"
#include "lmr/trainer.hpp"

namespace lmr {

const GradProbe* GradCheckReport::worst() const {
    if (probes.empty()) return nullptr;
    return &*std::max_element(probes.begin(), probes.end(),
                              [](const GradProbe& a, const GradProbe& b) { return a.rel_error < b.rel_error; });
}

GradCheckSetup tiny_grad_check_setup(std::uint64_t seed) {
    GradCheckSetup s;
    s.model = tiny_model_config();
    WorldConfig w;
    w.seed = derive_seed({seed, 0x6772616dull});
    w.episodes = 3;
    w.clip_count = 4;
    w.visual_dim = s.model.visual_dim;
    w.text_dim = s.model.text_dim;
    w.distractors_per_episode = 1;
    w.min_segment_clips = 1;
    w.max_segment_clips = 2;
    w.vocab = {4, 4, 4};
    s.batch = to_samples(generate_dataset(w), world_text_config(w));
    return s;
}

GradCheckReport grad_check(const GradCheckSetup& setup, const GradCheckOptions& options) {
    if (!(options.step > 0.0)) throw ConfigError("grad_check step must be positive");
    setup.model.validate();
    setup.weights.validate();

    TrainConfig tc;
    tc.seed = options.seed;
    auto params = init_train_state<double>(setup.model, tc).params;
    const auto& layout = params.layout();

    std::vector<const Sample*> batch;
    for (const auto& s : setup.batch) batch.push_back(&s);
    BatchOptions bo;
    bo.training = false;
    bo.track_kinks = true;

    const auto base = batch_loss_and_grad<double>(setup.model, params, setup.weights, batch, bo);

    std::vector<std::size_t> candidates;
    for (const auto& p : layout.params()) {
        if (p.name.rfind(options.name_prefix, 0) != 0) continue;
        for (std::size_t i = 0; i < p.size(); ++i) candidates.push_back(p.offset + i);
    }
    if (candidates.empty()) throw ConfigError("no parameter matches prefix '" + options.name_prefix + "'");

    GradCheckReport report;
    report.tolerance = options.tolerance;
    std::mt19937_64 rng(derive_seed({options.seed, 0x70726f62ull}));
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    auto flat = params.flat();
    const std::size_t max_draws = 50 * std::max<std::size_t>(options.probes, 1);

    for (std::size_t draws = 0; report.probes.size() < options.probes && draws < max_draws; ++draws) {
        const std::size_t idx = candidates[pick(rng)];
        const double orig = flat[idx];
        flat[idx] = orig + options.step;
        const auto plus = batch_loss_and_grad<double>(setup.model, params, setup.weights, batch, bo);
        flat[idx] = orig - options.step;
        const auto minus = batch_loss_and_grad<double>(setup.model, params, setup.weights, batch, bo);
        flat[idx] = orig;
        if (plus.signature != base.signature || minus.signature != base.signature) {
            ++report.skipped;
            continue;
        }
        GradProbe probe;
        probe.param = layout.owner(idx).name;
        probe.flat_index = idx;
        probe.analytic = base.grad[idx];
        probe.numeric = (plus.total - minus.total) / (2.0 * options.step);
        const double denom = std::max({std::abs(probe.analytic), std::abs(probe.numeric), options.floor});
        probe.rel_error = std::abs(probe.analytic - probe.numeric) / denom;
        report.max_rel_error = std::max(report.max_rel_error, probe.rel_error);
        report.probes.push_back(std::move(probe));
    }
    report.passed = report.probes.size() == options.probes && report.max_rel_error < options.tolerance;
    return report;
}

}  // namespace lmr
