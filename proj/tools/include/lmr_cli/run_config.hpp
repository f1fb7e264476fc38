// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Merged configuration for every subcommand. Keys are "section.name", e.g.
// train.learning_rate; files use INI sections:
//
//   [train]
//   learning_rate = 1e-4

#pragma once

#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "lmr/model_config.hpp"
#include "lmr/objectives.hpp"
#include "lmr/synthetic_world.hpp"
#include "lmr/trainer.hpp"

namespace lmr::cli {

struct EvalOptions {
    std::size_t threads = 1;
};

struct RunConfig {
    WorldConfig world;
    ModelConfig model;
    TrainConfig train;
    LossWeights loss;
    EvalOptions eval;

    // Keys assigned by a file or an override, in any order.
    std::set<std::string> explicit_keys;

    // Throws ConfigError on the first unknown key or unparsable value.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    bool is_explicit(const std::string& key) const { return explicit_keys.count(key) != 0; }
    bool any_explicit(const std::string& section) const;

    void load_file(const std::filesystem::path& path);
    void load_ini(std::istream& in, const std::string& origin);
    // "key=value".
    void apply_override(const std::string& assignment);

    void validate() const;
    // Every key with its effective value, grouped by section.
    std::string to_ini() const;
};

std::vector<std::string> config_keys();

// Writes to_ini() as {dir}/effective_config.<hash>.ini and returns the path.
std::filesystem::path write_effective_config(const RunConfig& cfg, const std::filesystem::path& dir);

}  // namespace lmr::cli
