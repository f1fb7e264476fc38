// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central-difference verification of the analytic gradient of the batch
// objective, in 64-bit arithmetic.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmr/dataset.hpp"
#include "lmr/model_config.hpp"
#include "lmr/objectives.hpp"

namespace lmr {

struct GradCheckOptions {
    std::size_t probes = 200;
    double tolerance = 1e-4;
    double step = 1e-5;
    // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
    double floor = 1e-6;
    std::uint64_t seed = 0;
    // Only parameters whose name starts with this prefix are probed.
    std::string name_prefix;
};

struct GradProbe {
    std::string param;
    std::size_t flat_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradProbe> probes;
    std::size_t skipped = 0;  // draws whose +-step straddled a branch change
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;

    const GradProbe* worst() const;
};

struct GradCheckSetup {
    ModelConfig model;
    LossWeights weights;
    std::vector<Sample> batch;
};

// tiny_model_config() on a four-clip world with one distractor and a batch
// of three episodes.
GradCheckSetup tiny_grad_check_setup(std::uint64_t seed = 0);

// Passes when every probe's relative error is strictly below the tolerance.
GradCheckReport grad_check(const GradCheckSetup& setup, const GradCheckOptions& options = {});

}  // namespace lmr
