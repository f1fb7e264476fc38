// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string_view>
#include <vector>

#include "lmr/manifest.hpp"

namespace lmr {

// Captioning prompts sent to the offline video-language model, one picked at
// random per clip. Order and bytes are fixed: DescriptionRecord stores the
// index into this list.
inline constexpr std::array<std::string_view, 10> kInstructions = {
    "Describe the following video concisely.",
    "Present a brief overview of the provided video.",
    "Provide a concise description of the given video.",
    "Convey a short narrative summarizing the provided  video.",
    "Summarize the visual content of the following video.",
    "Deliver a compact portrayal of the presented video.",
    "Furnish a concise explanation of the given video.",
    "Supply a brief account of the provided video.",
    "Narrate the contents of the video with precision.",
    "Offer a succinct analysis of the given video.",
};

struct SampledInstruction {
    std::string_view instruction;
    std::size_t index = 0;
};

SampledInstruction sample_instruction(std::mt19937_64& rng);

struct PromptRequest {
    std::string vid;
    std::uint32_t clip_index = 0;
    std::size_t instruction_index = 0;
};

// One request per (vid, clip_index), ordered by vid then clip index. Videos
// shared by several queries are emitted once.
std::vector<PromptRequest> build_prompt_batch(const std::vector<EpisodeRecord>& episodes,
                                              std::uint64_t seed);

void write_prompt_batch(const std::vector<PromptRequest>& batch, std::ostream& out);
void emit_prompt_batch(const std::vector<EpisodeRecord>& episodes, std::uint64_t seed,
                       const std::filesystem::path& path);

}  // namespace lmr
