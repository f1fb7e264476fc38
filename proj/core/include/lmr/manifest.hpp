// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace lmr {

struct Window {
    double start = 0.0;
    double end = 0.0;

    friend bool operator==(const Window&, const Window&) = default;
};

/// One (video, query) entry of a moment-retrieval manifest.
struct EpisodeRecord {
    std::string vid;
    std::string qid;
    std::string query;
    double duration = 0.0;  // seconds
    std::uint32_t clip_count = 0;
    double clip_seconds = 2.0;
    std::vector<Window> windows;
    // Latent scene attributes; only synthetic episodes carry them.
    std::map<std::string, std::int64_t> attributes;

    friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

/// A clip-level description produced offline by an external captioner.
struct DescriptionRecord {
    std::string vid;
    std::uint32_t clip_index = 0;
    std::string text;
    std::uint32_t instruction_index = 0;

    friend bool operator==(const DescriptionRecord&, const DescriptionRecord&) = default;
};

struct ManifestOptions {
    double clip_seconds = 2.0;
    // Training manifests must carry at least one window per query.
    bool require_windows = true;
};

// Throws ValidationError when a record breaks the window or id invariants.
void validate_episode(const EpisodeRecord& record, bool require_windows = true);

std::vector<EpisodeRecord> parse_manifest(std::istream& in, const ManifestOptions& options = {});
std::vector<EpisodeRecord> load_manifest(const std::filesystem::path& path,
                                         const ManifestOptions& options = {});

// One JSON object per line using the QVHighlights key names; synthetic
// attributes are written under "attributes".
std::string manifest_line(const EpisodeRecord& record);
void write_manifest(const std::vector<EpisodeRecord>& records, const std::filesystem::path& path);

std::vector<DescriptionRecord> parse_descriptions(std::istream& in);
std::vector<DescriptionRecord> load_descriptions(const std::filesystem::path& path);
void write_descriptions(const std::vector<DescriptionRecord>& records,
                        const std::filesystem::path& path);

}  // namespace lmr
