// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "lmr/model_config.hpp"

namespace lmr {

struct ParamInfo {
    std::string name;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::size_t offset = 0;

    std::size_t size() const { return std::size_t(rows) * cols; }
};

/// Ordered list of named parameter blocks packed into one flat vector.
class ParamLayout {
public:
    std::size_t add(std::string name, std::uint32_t rows, std::uint32_t cols);

    const std::vector<ParamInfo>& params() const { return params_; }
    const ParamInfo& at(std::size_t index) const { return params_.at(index); }
    // Index of `name`; throws ShapeError when unknown.
    std::size_t index(std::string_view name) const;
    bool contains(std::string_view name) const;
    std::size_t total_size() const { return total_; }
    // Name of the block containing flat element `flat_index`.
    const ParamInfo& owner(std::size_t flat_index) const;

    friend bool operator==(const ParamLayout& a, const ParamLayout& b);

private:
    std::vector<ParamInfo> params_;
    std::unordered_map<std::string, std::size_t> by_name_;
    std::size_t total_ = 0;
};

// Every trainable tensor of the network. The VQF weights appear once and are
// read by both the visual and the context stream.
ParamLayout make_layout(const ModelConfig& cfg);

template <typename S>
class ParamStore {
public:
    using MatrixMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using MutableMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    ParamStore() = default;
    explicit ParamStore(ParamLayout layout)
        : layout_(std::move(layout)), data_(layout_.total_size(), S(0)) {}

    const ParamLayout& layout() const { return layout_; }
    std::span<const S> flat() const { return data_; }
    std::span<S> flat() { return data_; }

    MatrixMap view(std::size_t index) const {
        const auto& p = layout_.at(index);
        return MatrixMap(data_.data() + p.offset, p.rows, p.cols);
    }
    MutableMap view(std::size_t index) {
        const auto& p = layout_.at(index);
        return MutableMap(data_.data() + p.offset, p.rows, p.cols);
    }
    MatrixMap view(std::string_view name) const { return view(layout_.index(name)); }
    MutableMap view(std::string_view name) { return view(layout_.index(name)); }

    std::vector<S> flatten() const { return data_; }
    void unflatten(std::span<const S> flat);

    template <typename T>
    ParamStore<T> cast() const {
        ParamStore<T> out(layout_);
        auto dst = out.flat();
        for (std::size_t i = 0; i < data_.size(); ++i) dst[i] = static_cast<T>(data_[i]);
        return out;
    }

    friend bool operator==(const ParamStore& a, const ParamStore& b) {
        return a.layout_ == b.layout_ && a.data_ == b.data_;
    }

private:
    ParamLayout layout_;
    std::vector<S> data_;
};

using ModelParams = ParamStore<float>;

// Xavier-uniform weights, zero biases, unit LayerNorm gains; learned
// embeddings drawn from N(0, 0.5^2). Values are drawn in double and rounded,
// so float and double stores initialized with one seed agree.
template <typename S>
ParamStore<S> init_params(const ModelConfig& cfg, std::uint64_t seed);

// Throws ValidationError naming the first non-finite parameter.
template <typename S>
void check_finite(const ParamStore<S>& params);

}  // namespace lmr
