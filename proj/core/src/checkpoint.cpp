// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "lmr/errors.hpp"

namespace lmr {

namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'L', 'M', 'R', 'C'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[at + i]) << (8 * i);
    return v;
}

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> values) {
    for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

json model_json(const ModelConfig& m) {
    json j;
    j["hidden_dim"] = m.hidden_dim;
    j["heads"] = m.heads;
    j["vqf_layers"] = m.vqf_layers;
    j["vcm_layers"] = m.vcm_layers;
    j["decoder_layers"] = m.decoder_layers;
    j["k_moment_queries"] = m.k_moment_queries;
    j["visual_dim"] = m.visual_dim;
    j["text_dim"] = m.text_dim;
    j["dropout"] = m.dropout;
    j["ffn_expansion"] = m.ffn_expansion;
    j["clip_positions"] = m.clip_positions;
    return j;
}

ModelConfig model_from_json(const json& j) {
    ModelConfig m;
    m.hidden_dim = j.at("hidden_dim").get<std::uint32_t>();
    m.heads = j.at("heads").get<std::uint32_t>();
    m.vqf_layers = j.at("vqf_layers").get<std::uint32_t>();
    m.vcm_layers = j.at("vcm_layers").get<std::uint32_t>();
    m.decoder_layers = j.at("decoder_layers").get<std::uint32_t>();
    m.k_moment_queries = j.at("k_moment_queries").get<std::uint32_t>();
    m.visual_dim = j.at("visual_dim").get<std::uint32_t>();
    m.text_dim = j.at("text_dim").get<std::uint32_t>();
    m.dropout = j.at("dropout").get<double>();
    m.ffn_expansion = j.at("ffn_expansion").get<std::uint32_t>();
    m.clip_positions = j.at("clip_positions").get<bool>();
    return m;
}

json breakdown_json(const EpochLoss& e) {
    json j;
    j["epoch"] = e.epoch;
    j["l1"] = e.mean.l1;
    j["giou"] = e.mean.giou;
    j["ce"] = e.mean.ce;
    j["l_mr"] = e.mean.l_mr;
    j["l_cont"] = e.mean.l_cont;
    j["total"] = e.mean.total;
    return j;
}

EpochLoss breakdown_from_json(const json& j) {
    EpochLoss e;
    e.epoch = j.at("epoch").get<std::uint32_t>();
    e.mean.l1 = j.at("l1").get<double>();
    e.mean.giou = j.at("giou").get<double>();
    e.mean.ce = j.at("ce").get<double>();
    e.mean.l_mr = j.at("l_mr").get<double>();
    e.mean.l_cont = j.at("l_cont").get<double>();
    e.mean.total = j.at("total").get<double>();
    return e;
}

}  // namespace

std::string model_config_json(const ModelConfig& model) {
    return model_json(model).dump();
}

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& model, const TrainState& state,
                                            bool include_optimizer) {
    const auto& layout = state.params.layout();
    if (!(layout == make_layout(model))) throw ShapeError("checkpoint parameters do not match the model config");
    const bool with_moments = include_optimizer && state.adam_m.size() == layout.total_size() &&
                              state.adam_v.size() == layout.total_size();

    json header;
    header["format"] = "LMRC";
    header["model"] = model_json(model);
    json params = json::array();
    for (const auto& p : layout.params()) params.push_back({{"name", p.name}, {"shape", {p.rows, p.cols}}});
    header["params"] = params;
    header["sections"] = with_moments ? json{"params", "adam_m", "adam_v"} : json{"params"};
    json train;
    train["seed"] = state.seed;
    train["epoch"] = state.epoch;
    train["step"] = state.step;
    json history = json::array();
    for (const auto& e : state.loss_history) history.push_back(breakdown_json(e));
    train["loss_history"] = history;
    header["train"] = train;
    const std::string text = header.dump() + "\n";

    std::vector<std::uint8_t> out;
    out.reserve(12 + text.size() + 4 * layout.total_size() * (with_moments ? 3 : 1));
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    put_floats(out, state.params.flat());
    if (with_moments) {
        put_floats(out, state.adam_m);
        put_floats(out, state.adam_v);
    }
    return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not an LMRC checkpoint");
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t header_len = get_u32(bytes, 8);
    if (bytes.size() < 12 + std::size_t(header_len)) throw TruncationError("checkpoint header truncated");

    Checkpoint ck;
    json header;
    ParamLayout stored;
    std::size_t count = 0;
    try {
        header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
        ck.model = model_from_json(header.at("model"));
        ck.model.validate();
        const auto& train = header.at("train");
        ck.state.seed = train.at("seed").get<std::uint64_t>();
        ck.state.epoch = train.at("epoch").get<std::uint32_t>();
        ck.state.step = train.at("step").get<std::uint64_t>();
        for (const auto& e : train.at("loss_history")) ck.state.loss_history.push_back(breakdown_from_json(e));
        for (const auto& p : header.at("params")) {
            stored.add(p.at("name").get<std::string>(), p.at("shape").at(0).get<std::uint32_t>(),
                       p.at("shape").at(1).get<std::uint32_t>());
        }
        count = header.at("sections").size();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }

    const ParamLayout expected = make_layout(ck.model);
    if (!(stored == expected)) throw FormatError("checkpoint parameter manifest disagrees with its model config");

    const std::size_t n = stored.total_size();
    if (count != 1 && count != 3) throw FormatError("checkpoint must hold 1 or 3 sections");
    const std::size_t need = 12 + std::size_t(header_len) + 4 * n * count;
    if (bytes.size() != need) {
        throw TruncationError("checkpoint payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                              std::to_string(need));
    }
    auto read_section = [&](std::size_t index, std::span<float> dst) {
        const std::size_t base = 12 + std::size_t(header_len) + 4 * n * index;
        for (std::size_t i = 0; i < n; ++i) dst[i] = std::bit_cast<float>(get_u32(bytes, base + 4 * i));
    };
    ck.state.params = ParamStore<float>(stored);
    read_section(0, ck.state.params.flat());
    ck.state.adam_m.assign(n, 0.0f);
    ck.state.adam_v.assign(n, 0.0f);
    if (count == 3) {
        read_section(1, ck.state.adam_m);
        read_section(2, ck.state.adam_v);
    }
    check_finite(ck.state.params);
    return ck;
}

void save_checkpoint(const ModelConfig& model, const TrainState& state, const std::filesystem::path& path,
                     bool include_optimizer) {
    const auto bytes = encode_checkpoint(model, state, include_optimizer);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
    Checkpoint ck = load_checkpoint(path);
    const ParamLayout want = make_layout(expected);
    const auto& have = ck.state.params.layout();
    for (const auto& p : want.params()) {
        if (!have.contains(p.name)) throw ShapeError("checkpoint lacks parameter " + p.name);
        const auto& h = have.at(have.index(p.name));
        if (h.rows != p.rows || h.cols != p.cols) {
            throw ShapeError("parameter " + p.name + " has shape " + std::to_string(h.rows) + "x" +
                             std::to_string(h.cols) + " in checkpoint, config expects " + std::to_string(p.rows) +
                             "x" + std::to_string(p.cols));
        }
    }
    for (const auto& p : have.params()) {
        if (!want.contains(p.name)) throw ShapeError("checkpoint has unexpected parameter " + p.name);
    }
    if (!(ck.model == expected)) {
        // Same tensors, different non-shape settings (dropout, positions):
        // the config supplied by the caller wins.
        ck.model = expected;
    }
    return ck;
}

}  // namespace lmr
