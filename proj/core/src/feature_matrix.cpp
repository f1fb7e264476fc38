// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/feature_matrix.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "lmr/errors.hpp"

namespace lmr {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[at + i]) << (8 * i);
    return v;
}

}  // namespace

std::string_view to_string(FeatureRole role) {
    switch (role) {
        case FeatureRole::visual: return "visual";
        case FeatureRole::context_text: return "context_text";
        case FeatureRole::query: return "query";
    }
    return "unknown";
}

FeatureMatrix::FeatureMatrix(std::uint32_t rows, std::uint32_t cols, std::vector<float> data,
                             FeatureRole role)
    : rows_(rows), cols_(cols), data_(std::move(data)), role_(role) {
    if (rows_ < 1 || cols_ < 1) {
        throw ValidationError("feature matrix must have rows >= 1 and cols >= 1, got " +
                              std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    if (data_.size() != std::size_t(rows_) * cols_) {
        throw ShapeError("feature matrix payload has " + std::to_string(data_.size()) +
                              " elements, expected " + std::to_string(std::size_t(rows_) * cols_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw ValidationError("non-finite feature value at element " + std::to_string(i));
        }
    }
}

FeatureMatrix FeatureMatrix::zeros(std::uint32_t rows, std::uint32_t cols, FeatureRole role) {
    return FeatureMatrix(rows, cols, std::vector<float>(std::size_t(rows) * cols, 0.0f), role);
}

std::span<const float> FeatureMatrix::row(std::uint32_t r) const {
    return std::span<const float>(data_).subspan(std::size_t(r) * cols_, cols_);
}

std::span<float> FeatureMatrix::row(std::uint32_t r) {
    return std::span<float>(data_).subspan(std::size_t(r) * cols_, cols_);
}

bool FeatureMatrix::bit_equal(const FeatureMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ &&
           std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

std::vector<std::uint8_t> encode_fmt1(const FeatureMatrix& m) {
    std::vector<std::uint8_t> out;
    out.reserve(kFmt1HeaderBytes + 4 * m.data().size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, m.rows());
    put_u32(out, m.cols());
    for (float f : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

FeatureMatrix decode_fmt1(std::span<const std::uint8_t> bytes, FeatureRole role) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("missing FMT1 magic");
    }
    if (bytes.size() < kFmt1HeaderBytes) {
        throw TruncationError("FMT1 header is " + std::to_string(bytes.size()) + " bytes, expected " +
                              std::to_string(kFmt1HeaderBytes));
    }
    const std::uint32_t rows = get_u32(bytes, 4);
    const std::uint32_t cols = get_u32(bytes, 8);
    const std::size_t count = std::size_t(rows) * cols;
    const std::size_t payload = bytes.size() - kFmt1HeaderBytes;
    if (payload != 4 * count) {
        throw TruncationError("FMT1 header declares " + std::to_string(rows) + "x" +
                              std::to_string(cols) + " (" + std::to_string(4 * count) +
                              " payload bytes) but " + std::to_string(payload) + " are present");
    }
    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = std::bit_cast<float>(get_u32(bytes, kFmt1HeaderBytes + 4 * i));
    }
    return FeatureMatrix(rows, cols, std::move(data), role);
}

void write_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path) {
    if (m.empty()) throw ValidationError("refusing to write an empty feature matrix");
    const auto bytes = encode_fmt1(m);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path, FeatureRole role) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return decode_fmt1(bytes, role);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const TruncationError& e) {
        throw TruncationError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace lmr
