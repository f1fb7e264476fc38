// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace lmr {

enum class FeatureRole : std::uint8_t { visual, context_text, query };

std::string_view to_string(FeatureRole role);

/// Row-major float32 matrix holding one feature sequence (clips or words).
///
/// The constructor enforces the invariants shared by every feature file:
/// at least one row, at least one column, matching payload length and
/// finite elements. A default-constructed matrix is empty and only useful
/// as a placeholder.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::uint32_t rows, std::uint32_t cols, std::vector<float> data,
                  FeatureRole role = FeatureRole::visual);

    static FeatureMatrix zeros(std::uint32_t rows, std::uint32_t cols,
                               FeatureRole role = FeatureRole::visual);

    std::uint32_t rows() const { return rows_; }
    std::uint32_t cols() const { return cols_; }
    FeatureRole role() const { return role_; }
    void set_role(FeatureRole role) { role_ = role; }
    bool empty() const { return data_.empty(); }

    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }
    std::span<const float> row(std::uint32_t r) const;
    std::span<float> row(std::uint32_t r);

    float operator()(std::uint32_t r, std::uint32_t c) const { return data_[std::size_t(r) * cols_ + c]; }
    float& operator()(std::uint32_t r, std::uint32_t c) { return data_[std::size_t(r) * cols_ + c]; }

    // Element-wise bit equality (role is not part of the on-disk format).
    bool bit_equal(const FeatureMatrix& other) const;

private:
    std::uint32_t rows_ = 0;
    std::uint32_t cols_ = 0;
    std::vector<float> data_;
    FeatureRole role_ = FeatureRole::visual;
};

// FMT1 layout: "FMT1" | rows u32 LE | cols u32 LE | rows*cols f32 LE.
inline constexpr std::size_t kFmt1HeaderBytes = 12;

std::vector<std::uint8_t> encode_fmt1(const FeatureMatrix& m);
FeatureMatrix decode_fmt1(std::span<const std::uint8_t> bytes,
                          FeatureRole role = FeatureRole::visual);

void write_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path,
                                  FeatureRole role = FeatureRole::visual);

}  // namespace lmr
