// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr_cli/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "lmr/errors.hpp"
#include "lmr/random.hpp"

namespace lmr::cli {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <typename T>
T parse_uint(const std::string& key, const std::string& s) {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
    }
    return v;
}

double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw ConfigError(key + ": expected a number, got '" + s + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Field uint_field(Access access) {
    return {[access](RunConfig& c, const std::string& k, const std::string& v) {
                access(c) = parse_uint<T>(k, v);
            },
            [access](const RunConfig& c) { return std::to_string(access(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Field double_field(Access access) {
    return {[access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_double(k, v); },
            [access](const RunConfig& c) { return fmt_double(access(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Field bool_field(Access access) {
    return {[access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_bool(k, v); },
            [access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

#define LMR_U32(expr) uint_field<std::uint32_t>([](RunConfig& c) -> std::uint32_t& { return expr; })
#define LMR_U64(expr) uint_field<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return expr; })
#define LMR_SIZE(expr) uint_field<std::size_t>([](RunConfig& c) -> std::size_t& { return expr; })
#define LMR_F64(expr) double_field([](RunConfig& c) -> double& { return expr; })
#define LMR_BOOL(expr) bool_field([](RunConfig& c) -> bool& { return expr; })

const std::vector<std::pair<std::string, Field>>& registry() {
    static const std::vector<std::pair<std::string, Field>> fields = {
        {"world.seed", LMR_U64(c.world.seed)},
        {"world.embedding_seed", LMR_U64(c.world.embedding_seed)},
        {"world.episodes", LMR_U32(c.world.episodes)},
        {"world.clip_count", LMR_U32(c.world.clip_count)},
        {"world.clip_seconds", LMR_F64(c.world.clip_seconds)},
        {"world.visual_dim", LMR_U32(c.world.visual_dim)},
        {"world.text_dim", LMR_U32(c.world.text_dim)},
        {"world.actions", LMR_U32(c.world.vocab.actions)},
        {"world.backgrounds", LMR_U32(c.world.vocab.backgrounds)},
        {"world.appearances", LMR_U32(c.world.vocab.appearances)},
        {"world.distractors_per_episode", LMR_U32(c.world.distractors_per_episode)},
        {"world.min_segment_clips", LMR_U32(c.world.min_segment_clips)},
        {"world.max_segment_clips", LMR_U32(c.world.max_segment_clips)},
        {"world.noise_sigma", LMR_F64(c.world.noise_sigma)},
        {"world.context_only_fraction", LMR_F64(c.world.context_only_fraction)},
        {"model.hidden_dim", LMR_U32(c.model.hidden_dim)},
        {"model.heads", LMR_U32(c.model.heads)},
        {"model.vqf_layers", LMR_U32(c.model.vqf_layers)},
        {"model.vcm_layers", LMR_U32(c.model.vcm_layers)},
        {"model.decoder_layers", LMR_U32(c.model.decoder_layers)},
        {"model.k_moment_queries", LMR_U32(c.model.k_moment_queries)},
        {"model.visual_dim", LMR_U32(c.model.visual_dim)},
        {"model.text_dim", LMR_U32(c.model.text_dim)},
        {"model.dropout", LMR_F64(c.model.dropout)},
        {"model.ffn_expansion", LMR_U32(c.model.ffn_expansion)},
        {"model.clip_positions", LMR_BOOL(c.model.clip_positions)},
        {"train.learning_rate", LMR_F64(c.train.learning_rate)},
        {"train.weight_decay", LMR_F64(c.train.weight_decay)},
        {"train.batch_size", LMR_U32(c.train.batch_size)},
        {"train.epochs", LMR_U32(c.train.epochs)},
        {"train.seed", LMR_U64(c.train.seed)},
        {"train.grad_clip_norm", LMR_F64(c.train.grad_clip_norm)},
        {"train.eval_every", LMR_U32(c.train.eval_every)},
        {"train.threads", LMR_SIZE(c.train.threads)},
        {"train.optimizer",
         {[](RunConfig& c, const std::string&, const std::string& v) { c.train.optimizer = parse_optimizer(v); },
          [](const RunConfig& c) { return to_string(c.train.optimizer); }}},
        {"train.beta1", LMR_F64(c.train.beta1)},
        {"train.beta2", LMR_F64(c.train.beta2)},
        {"train.eps", LMR_F64(c.train.eps)},
        {"loss.l1", LMR_F64(c.loss.l1)},
        {"loss.iou", LMR_F64(c.loss.iou)},
        {"loss.ce", LMR_F64(c.loss.ce)},
        {"loss.mr", LMR_F64(c.loss.mr)},
        {"loss.cont", LMR_F64(c.loss.cont)},
        {"loss.positive_saliency", LMR_BOOL(c.loss.positive_saliency)},
        {"eval.threads", LMR_SIZE(c.eval.threads)},
    };
    return fields;
}

#undef LMR_U32
#undef LMR_U64
#undef LMR_SIZE
#undef LMR_F64
#undef LMR_BOOL

const Field& find_field(const std::string& key) {
    for (const auto& [k, f] : registry()) {
        if (k == key) return f;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, f] : registry()) keys.push_back(k);
    return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    find_field(key).set(*this, key, trim(value));
    explicit_keys.insert(key);
}

std::string RunConfig::get(const std::string& key) const {
    return find_field(key).get(*this);
}

bool RunConfig::any_explicit(const std::string& section) const {
    const std::string prefix = section + ".";
    for (const auto& k : explicit_keys) {
        if (k.rfind(prefix, 0) == 0) return true;
    }
    return false;
}

void RunConfig::load_ini(std::istream& in, const std::string& origin) {
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const CLI::Error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        const std::string key = item.fullname();
        if (item.inputs.size() != 1) throw ConfigError(origin + ": key '" + key + "' needs exactly one value");
        try {
            set(key, item.inputs.front());
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ": " + e.what());
        }
    }
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    load_ini(in, path.string());
}

void RunConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::validate() const {
    world.validate();
    model.validate();
    train.validate();
    loss.validate();
}

std::string RunConfig::to_ini() const {
    std::ostringstream out;
    std::string section;
    for (const auto& [key, field] : registry()) {
        const auto dot = key.find('.');
        const std::string s = key.substr(0, dot);
        if (s != section) {
            if (!section.empty()) out << '\n';
            out << '[' << s << "]\n";
            section = s;
        }
        out << key.substr(dot + 1) << " = " << field.get(*this) << '\n';
    }
    return out.str();
}

std::filesystem::path write_effective_config(const RunConfig& cfg, const std::filesystem::path& dir) {
    const std::string text = cfg.to_ini();
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    std::filesystem::create_directories(dir);
    const auto path = dir / ("effective_config." + std::string(hash, 8) + ".ini");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    return path;
}

}  // namespace lmr::cli
