// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <functional>
#include <random>

#include "lmr/tape.hpp"

using namespace lmr;
using M = Mat<double>;

namespace {

M random(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    M m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

// Builds an op over variable inputs and returns its output.
using Op = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

// Contracts the output with a fixed random weight so every entry matters.
double objective(const Op& op, const std::vector<M>& inputs, const M& weight, std::vector<M>* grads) {
    Tape<double> t;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(t.variable(x));
    const Var out = op(t, vars);
    REQUIRE(t.value(out).rows() == weight.rows());
    REQUIRE(t.value(out).cols() == weight.cols());
    const double loss = (t.value(out).array() * weight.array()).sum();
    if (grads) {
        const Var root = t.external_scalar(out, loss, weight);
        t.backward(root);
        grads->clear();
        for (std::size_t i = 0; i < vars.size(); ++i) {
            const M& g = t.grad(vars[i]);
            grads->push_back(g.size() ? g : M::Zero(inputs[i].rows(), inputs[i].cols()));
        }
    }
    return loss;
}

void check_op(const char* name, const Op& op, std::vector<M> inputs, Eigen::Index out_r, Eigen::Index out_c,
              std::uint64_t seed = 1) {
    CAPTURE(name);
    std::mt19937_64 rng(seed);
    const M weight = random(out_r, out_c, rng);
    std::vector<M> grads;
    objective(op, inputs, weight, &grads);
    const double h = 1e-6;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
            const double x = inputs[k].data()[i];
            inputs[k].data()[i] = x + h;
            const double up = objective(op, inputs, weight, nullptr);
            inputs[k].data()[i] = x - h;
            const double down = objective(op, inputs, weight, nullptr);
            inputs[k].data()[i] = x;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grads[k].data()[i];
            CAPTURE(k);
            CAPTURE(i);
            CHECK(analytic == doctest::Approx(numeric).epsilon(1e-5).scale(1.0));
        }
    }
}

}  // namespace

TEST_CASE("tape operations match central differences") {
    std::mt19937_64 rng(42);
    check_op("matmul", [](auto& t, auto& v) { return t.matmul(v[0], v[1]); }, {random(3, 4, rng), random(4, 2, rng)},
             3, 2);
    check_op("matmul_nt", [](auto& t, auto& v) { return t.matmul_nt(v[0], v[1]); },
             {random(3, 4, rng), random(5, 4, rng)}, 3, 5);
    check_op("linear", [](auto& t, auto& v) { return t.linear(v[0], v[1], v[2]); },
             {random(3, 4, rng), random(4, 2, rng), random(1, 2, rng)}, 3, 2);
    check_op("add", [](auto& t, auto& v) { return t.add(v[0], v[1]); }, {random(2, 3, rng), random(2, 3, rng)}, 2, 3);
    check_op("add_row", [](auto& t, auto& v) { return t.add_row(v[0], v[1]); },
             {random(4, 3, rng), random(1, 3, rng)}, 4, 3);
    check_op("scale", [](auto& t, auto& v) { return t.scale(v[0], 0.37); }, {random(2, 2, rng)}, 2, 2);
    check_op("mask", [](auto& t, auto& v) {
        M m(2, 2);
        m << 0, 2, 2, 0;
        return t.mask(v[0], m);
    }, {random(2, 2, rng)}, 2, 2);
    // Keep inputs away from the relu kink.
    M r = random(3, 3, rng);
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] += r.data()[i] > 0 ? 0.1 : -0.1;
    check_op("relu", [](auto& t, auto& v) { return t.relu(v[0]); }, {r}, 3, 3);
    check_op("sigmoid", [](auto& t, auto& v) { return t.sigmoid(v[0]); }, {random(2, 3, rng, 2.0)}, 2, 3);
    check_op("layer_norm", [](auto& t, auto& v) { return t.layer_norm(v[0], v[1], v[2]); },
             {random(3, 5, rng), random(1, 5, rng), random(1, 5, rng)}, 3, 5);
    check_op("attention", [](auto& t, auto& v) { return t.attention(v[0], v[1], v[2], 2); },
             {random(3, 4, rng), random(5, 4, rng), random(5, 4, rng)}, 3, 4);
    check_op("concat_rows", [](auto& t, auto& v) { return t.concat_rows({v[0], v[1], v[0]}); },
             {random(1, 3, rng), random(2, 3, rng)}, 4, 3);
    check_op("slice_rows", [](auto& t, auto& v) { return t.slice_rows(v[0], 1, 2); }, {random(4, 3, rng)}, 2, 3);
    check_op("slice_cols", [](auto& t, auto& v) { return t.slice_cols(v[0], 1, 2); }, {random(2, 4, rng)}, 2, 2);
    check_op("mean_rows", [](auto& t, auto& v) { return t.mean_rows(v[0]); }, {random(4, 3, rng)}, 1, 3);
    check_op("repeat_rows", [](auto& t, auto& v) { return t.repeat_rows(v[0], 3); }, {random(1, 3, rng)}, 3, 3);
    check_op("rowwise_dot", [](auto& t, auto& v) { return t.rowwise_dot(v[0], v[1], 0.5); },
             {random(4, 3, rng), random(4, 3, rng)}, 1, 4);
}

TEST_CASE("attention rows are probability distributions") {
    std::mt19937_64 rng(8);
    Tape<double> t;
    AttentionMaps<double> maps;
    t.attention(t.constant(random(6, 8, rng, 3.0)), t.constant(random(9, 8, rng, 3.0)),
                t.constant(random(9, 8, rng)), 4, &maps);
    REQUIRE(maps.probs.size() == 4);
    for (const auto& p : maps.probs) {
        CHECK(p.rows() == 6);
        CHECK(p.cols() == 9);
        CHECK(p.minCoeff() >= 0.0);
        for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("constants receive no gradient and shape errors throw") {
    Tape<double> t;
    const Var c = t.constant(M::Ones(2, 2));
    const Var v = t.variable(M::Ones(2, 2));
    const Var s = t.add(c, v);
    const Var root = t.external_scalar(s, 0.0, M::Ones(2, 2));
    t.backward(root);
    CHECK(t.grad(c).size() == 0);
    CHECK(t.grad(v).sum() == doctest::Approx(4.0));
    CHECK_THROWS_AS(t.add(c, t.constant(M::Ones(3, 2))), ShapeError);
    CHECK_THROWS_AS(t.matmul(c, t.constant(M::Ones(3, 2))), ShapeError);
    CHECK_THROWS_AS(t.backward(s), ShapeError);
}

TEST_CASE("relu records its branch pattern when tracking kinks") {
    Tape<double> a, b;
    a.track_kinks(true);
    b.track_kinks(true);
    M x(1, 2);
    x << 0.5, -0.5;
    a.relu(a.constant(x));
    x(0, 1) = 0.25;
    b.relu(b.constant(x));
    CHECK(a.kink_signature() != b.kink_signature());
}
