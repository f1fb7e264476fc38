// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lmr/errors.hpp"

namespace lmr {

using nlohmann::json;

namespace {

std::string where(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

void validate_episode(const EpisodeRecord& r, bool require_windows) {
    if (r.qid.empty()) throw ValidationError("episode has an empty qid");
    if (r.vid.empty()) throw ValidationError("episode " + r.qid + " has an empty vid");
    if (!(r.clip_seconds > 0.0)) throw ValidationError("episode " + r.qid + ": clip_seconds must be positive");
    if (r.clip_count < 1) throw ValidationError("episode " + r.qid + ": clip_count must be >= 1");
    if (!(r.duration > 0.0)) throw ValidationError("episode " + r.qid + ": duration must be positive");
    if (require_windows && r.windows.empty()) {
        throw ValidationError("episode " + r.qid + " has no relevant windows");
    }
    for (const auto& w : r.windows) {
        if (!(w.start >= 0.0 && w.start < w.end && w.end <= r.duration)) {
            std::ostringstream msg;
            msg << "episode " << r.qid << ": window [" << w.start << ", " << w.end
                << "] outside [0, " << r.duration << "] or degenerate";
            throw ValidationError(msg.str());
        }
    }
}

std::vector<EpisodeRecord> parse_manifest(std::istream& in, const ManifestOptions& options) {
    std::vector<EpisodeRecord> records;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(where(line_no) + "malformed JSON: " + e.what());
        }
        EpisodeRecord r;
        try {
            r.qid = j.at("qid").is_string() ? j.at("qid").get<std::string>()
                                            : std::to_string(j.at("qid").get<long long>());
            r.vid = j.at("vid").get<std::string>();
            r.query = j.at("query").get<std::string>();
            r.duration = j.at("duration").get<double>();
            r.clip_seconds = j.value("clip_seconds", options.clip_seconds);
            for (const auto& w : j.value("relevant_windows", json::array())) {
                if (!w.is_array() || w.size() != 2) {
                    throw FormatError(where(line_no) + "relevant_windows entries must be [start, end]");
                }
                r.windows.push_back({w[0].get<double>(), w[1].get<double>()});
            }
            if (j.contains("attributes")) {
                for (const auto& [k, v] : j["attributes"].items()) r.attributes[k] = v.get<std::int64_t>();
            }
        } catch (const json::exception& e) {
            throw FormatError(where(line_no) + e.what());
        }
        if (!(r.clip_seconds > 0.0)) throw ValidationError(where(line_no) + "clip_seconds must be positive");
        r.clip_count = static_cast<std::uint32_t>(std::lround(r.duration / r.clip_seconds));
        try {
            validate_episode(r, options.require_windows);
        } catch (const ValidationError& e) {
            throw ValidationError(where(line_no) + e.what());
        }
        if (!seen.insert(r.qid).second) {
            throw DuplicationError(where(line_no) + "duplicate qid " + r.qid);
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<EpisodeRecord> load_manifest(const std::filesystem::path& path,
                                         const ManifestOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    try {
        return parse_manifest(in, options);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string manifest_line(const EpisodeRecord& r) {
    json j;
    j["qid"] = r.qid;
    j["vid"] = r.vid;
    j["query"] = r.query;
    j["duration"] = r.duration;
    json windows = json::array();
    for (const auto& w : r.windows) windows.push_back({w.start, w.end});
    j["relevant_windows"] = windows;
    j["clip_seconds"] = r.clip_seconds;
    if (!r.attributes.empty()) j["attributes"] = r.attributes;
    return j.dump();
}

void write_manifest(const std::vector<EpisodeRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& r : records) out << manifest_line(r) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<DescriptionRecord> parse_descriptions(std::istream& in) {
    std::vector<DescriptionRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        try {
            const json j = json::parse(line);
            records.push_back({j.at("vid").get<std::string>(), j.at("clip_index").get<std::uint32_t>(),
                               j.at("text").get<std::string>(), j.value("instruction_index", 0u)});
        } catch (const json::exception& e) {
            throw FormatError(where(line_no) + e.what());
        }
    }
    return records;
}

std::vector<DescriptionRecord> load_descriptions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open descriptions: " + path.string());
    return parse_descriptions(in);
}

void write_descriptions(const std::vector<DescriptionRecord>& records,
                        const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& r : records) {
        json j;
        j["vid"] = r.vid;
        j["clip_index"] = r.clip_index;
        j["text"] = r.text;
        j["instruction_index"] = r.instruction_index;
        out << j.dump() << '\n';
    }
}

}  // namespace lmr
