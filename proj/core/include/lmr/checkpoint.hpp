// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container:
//   "LMRC" | u32 version | u32 header bytes | JSON header
//   | params (f32 LE) | [adam m (f32 LE) | adam v (f32 LE)]
// The header records the model config, the parameter manifest (name and
// shape, in storage order), the sections present and the training counters.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lmr/model_config.hpp"
#include "lmr/trainer.hpp"

namespace lmr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig model;
    TrainState state;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& model, const TrainState& state,
                                            bool include_optimizer = true);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ModelConfig& model, const TrainState& state, const std::filesystem::path& path,
                     bool include_optimizer = true);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Also checks the stored parameters against `expected`; a mismatch throws
// ShapeError naming the first differing parameter.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

std::string model_config_json(const ModelConfig& model);

}  // namespace lmr
