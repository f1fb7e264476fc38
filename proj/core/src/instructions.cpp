// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/instructions.hpp"

#include <fstream>
#include <map>
#include <ostream>

#include "json.hpp"
#include "lmr/errors.hpp"

namespace lmr {

SampledInstruction sample_instruction(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, kInstructions.size() - 1);
    const std::size_t i = pick(rng);
    return {kInstructions[i], i};
}

std::vector<PromptRequest> build_prompt_batch(const std::vector<EpisodeRecord>& episodes,
                                              std::uint64_t seed) {
    std::map<std::string, std::uint32_t> clips_per_video;
    for (const auto& e : episodes) {
        auto [it, inserted] = clips_per_video.emplace(e.vid, e.clip_count);
        if (!inserted && it->second != e.clip_count) {
            throw ValidationError("video " + e.vid + " listed with inconsistent clip counts");
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<PromptRequest> batch;
    for (const auto& [vid, clips] : clips_per_video) {
        for (std::uint32_t c = 0; c < clips; ++c) {
            batch.push_back({vid, c, sample_instruction(rng).index});
        }
    }
    return batch;
}

void write_prompt_batch(const std::vector<PromptRequest>& batch, std::ostream& out) {
    for (const auto& p : batch) {
        nlohmann::json j;
        j["vid"] = p.vid;
        j["clip_index"] = p.clip_index;
        j["instruction"] = kInstructions.at(p.instruction_index);
        j["instruction_index"] = p.instruction_index;
        out << j.dump() << '\n';
    }
}

void emit_prompt_batch(const std::vector<EpisodeRecord>& episodes, std::uint64_t seed,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    write_prompt_batch(build_prompt_batch(episodes, seed), out);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace lmr
