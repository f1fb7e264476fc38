// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tape records every operation of one forward pass; backward()
// replays them in reverse and accumulates adjoints. The scalar type is a
// template parameter so the same model code runs in float for training and
// in double for finite-difference gradient checks.

#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lmr/errors.hpp"

namespace lmr {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Per-head attention maps captured during a forward pass.
template <typename S>
struct AttentionMaps {
    std::vector<Mat<S>> logits;  // scaled scores, one matrix per head
    std::vector<Mat<S>> probs;   // row-wise softmax of `logits`
};

template <typename S>
class Tape {
public:
    using Matrix = Mat<S>;

    Tape() { nodes_.reserve(512); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // --- leaves --------------------------------------------------------

    Var constant(Matrix value) { return push(std::move(value), false, nullptr); }
    Var variable(Matrix value) { return push(std::move(value), true, nullptr); }

    const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
    // Adjoint of v after backward(); an empty matrix if nothing flowed into it.
    const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    // --- kink bookkeeping for gradient checks --------------------------
    //
    // When enabled, piecewise operations fold their active branch pattern
    // into a running hash. Two forward passes with equal signatures evaluate
    // the same smooth piece, so a central difference between them is valid.

    void track_kinks(bool on) { track_kinks_ = on; }
    bool tracking_kinks() const { return track_kinks_; }
    void note_branch(std::uint64_t bits) {
        signature_ = (signature_ ^ bits) * 0x100000001b3ull + 0x9E3779B97F4A7C15ull;
    }
    std::uint64_t kink_signature() const { return signature_; }

    // --- linear algebra ------------------------------------------------

    Var matmul(Var a, Var b) {
        check(cols(a) == rows(b), "matmul", a, b);
        Matrix out = value(a) * value(b);
        return push(std::move(out), any(a, b), [a, b](Tape& t, int self) {
            const Matrix& g = t.nodes_[self].grad;
            if (t.requires_grad(a)) t.grad_ref(a).noalias() += g * t.value(b).transpose();
            if (t.requires_grad(b)) t.grad_ref(b).noalias() += t.value(a).transpose() * g;
        });
    }

    // a * b^T
    Var matmul_nt(Var a, Var b) {
        check(cols(a) == cols(b), "matmul_nt", a, b);
        Matrix out = value(a) * value(b).transpose();
        return push(std::move(out), any(a, b), [a, b](Tape& t, int self) {
            const Matrix& g = t.nodes_[self].grad;
            if (t.requires_grad(a)) t.grad_ref(a).noalias() += g * t.value(b);
            if (t.requires_grad(b)) t.grad_ref(b).noalias() += g.transpose() * t.value(a);
        });
    }

    // x * w + b, with b a 1 x cols row broadcast over rows.
    Var linear(Var x, Var w, Var b) {
        check(cols(x) == rows(w), "linear", x, w);
        check(rows(b) == 1 && cols(b) == cols(w), "linear bias", w, b);
        Matrix out = value(x) * value(w);
        out.rowwise() += value(b).row(0);
        return push(std::move(out), any(x, w) || requires_grad(b), [x, w, b](Tape& t, int self) {
            const Matrix& g = t.nodes_[self].grad;
            if (t.requires_grad(x)) t.grad_ref(x).noalias() += g * t.value(w).transpose();
            if (t.requires_grad(w)) t.grad_ref(w).noalias() += t.value(x).transpose() * g;
            if (t.requires_grad(b)) t.grad_ref(b).row(0) += g.colwise().sum();
        });
    }

    Var add(Var a, Var b) {
        check(rows(a) == rows(b) && cols(a) == cols(b), "add", a, b);
        Matrix out = value(a) + value(b);
        return push(std::move(out), any(a, b), [a, b](Tape& t, int self) {
            const Matrix& g = t.nodes_[self].grad;
            if (t.requires_grad(a)) t.grad_ref(a) += g;
            if (t.requires_grad(b)) t.grad_ref(b) += g;
        });
    }

    // a + row, broadcasting a 1 x cols row.
    Var add_row(Var a, Var row) {
        check(rows(row) == 1 && cols(row) == cols(a), "add_row", a, row);
        Matrix out = value(a);
        out.rowwise() += value(row).row(0);
        return push(std::move(out), any(a, row), [a, row](Tape& t, int self) {
            const Matrix& g = t.nodes_[self].grad;
            if (t.requires_grad(a)) t.grad_ref(a) += g;
            if (t.requires_grad(row)) t.grad_ref(row).row(0) += g.colwise().sum();
        });
    }

    Var scale(Var a, S factor) {
        Matrix out = value(a) * factor;
        return push(std::move(out), requires_grad(a), [a, factor](Tape& t, int self) {
            t.grad_ref(a) += t.nodes_[self].grad * factor;
        });
    }

    // Element-wise product with a constant mask (dropout).
    Var mask(Var a, Matrix m) {
        check(m.rows() == rows(a) && m.cols() == cols(a), "mask", a, a);
        Matrix out = value(a).cwiseProduct(m);
        return push(std::move(out), requires_grad(a), [a, m = std::move(m)](Tape& t, int self) {
            t.grad_ref(a) += t.nodes_[self].grad.cwiseProduct(m);
        });
    }

    // --- nonlinearities ------------------------------------------------

    Var relu(Var a) {
        const Matrix& x = value(a);
        Matrix out = x.cwiseMax(S(0));
        if (track_kinks_) {
            std::uint64_t h = 0;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                h = h * 0x100000001b3ull + (x.data()[i] > S(0) ? 1u : 2u);
            }
            note_branch(h);
        }
        return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
            const Matrix& g = t.nodes_[self].grad;
            t.grad_ref(a).array() += (t.value(a).array() > S(0)).select(g.array(), S(0));
        });
    }

    Var sigmoid(Var a) {
        Matrix out = (S(1) + (-value(a).array()).exp()).inverse().matrix();
        return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
            const Matrix& y = t.nodes_[self].value;
            t.grad_ref(a).array() += t.nodes_[self].grad.array() * y.array() * (S(1) - y.array());
        });
    }

    // Row-wise layer normalization with affine parameters (1 x cols each).
    Var layer_norm(Var x, Var gamma, Var beta, S eps = S(1e-5)) {
        check(rows(gamma) == 1 && cols(gamma) == cols(x), "layer_norm gamma", x, gamma);
        check(rows(beta) == 1 && cols(beta) == cols(x), "layer_norm beta", x, beta);
        const Matrix& in = value(x);
        const Eigen::Index n = in.rows(), d = in.cols();
        auto xhat = std::make_shared<Matrix>(n, d);
        auto inv_std = std::make_shared<std::vector<S>>(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const S mean = in.row(r).mean();
            const S var = (in.row(r).array() - mean).square().mean();
            const S is = S(1) / std::sqrt(var + eps);
            (*inv_std)[r] = is;
            xhat->row(r) = (in.row(r).array() - mean) * is;
        }
        Matrix out = xhat->array().rowwise() * value(gamma).row(0).array();
        out.rowwise() += value(beta).row(0);
        const bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
        return push(std::move(out), rg, [x, gamma, beta, xhat, inv_std](Tape& t, int self) {
            const Matrix& g = t.nodes_[self].grad;
            if (t.requires_grad(gamma)) t.grad_ref(gamma).row(0) += (g.cwiseProduct(*xhat)).colwise().sum();
            if (t.requires_grad(beta)) t.grad_ref(beta).row(0) += g.colwise().sum();
            if (t.requires_grad(x)) {
                Matrix& gx = t.grad_ref(x);
                const auto gam = t.value(gamma).row(0).array();
                for (Eigen::Index r = 0; r < g.rows(); ++r) {
                    const RowVec<S> dxhat = (g.row(r).array() * gam).matrix();
                    const S mean_d = dxhat.mean();
                    const S mean_dx = dxhat.dot(xhat->row(r)) / S(dxhat.size());
                    gx.row(r).array() +=
                        (*inv_std)[r] * (dxhat.array() - mean_d - xhat->row(r).array() * mean_dx);
                }
            }
        });
    }

    // --- attention -----------------------------------------------------

    // Multi-head scaled dot-product attention over already-projected inputs:
    // for each head h (a contiguous block of cols/heads columns)
    //   out_h = softmax(q_h k_h^T / sqrt(cols/heads)) v_h.
    // When `maps` is non-null the per-head scores and probabilities are copied
    // into it.
    Var attention(Var q, Var k, Var v, int heads, AttentionMaps<S>* maps = nullptr) {
        check(cols(q) == cols(k) && rows(k) == rows(v), "attention", q, k);
        if (heads < 1 || cols(q) % heads != 0 || cols(v) % heads != 0) {
            throw ShapeError("attention: feature dims not divisible by heads=" + std::to_string(heads));
        }
        if (rows(k) < 1) throw ShapeError("attention: empty key set");
        const Eigen::Index n = rows(q), m = rows(k);
        const Eigen::Index dh = cols(q) / heads, dv = cols(v) / heads;
        const S inv_sqrt = S(1) / std::sqrt(S(dh));
        auto probs = std::make_shared<std::vector<Matrix>>(heads);
        Matrix out(n, cols(v));
        if (maps) {
            maps->logits.assign(heads, Matrix());
            maps->probs.assign(heads, Matrix());
        }
        for (int h = 0; h < heads; ++h) {
            Matrix scores = value(q).middleCols(h * dh, dh) * value(k).middleCols(h * dh, dh).transpose();
            scores *= inv_sqrt;
            if (maps) maps->logits[h] = scores;
            softmax_rows_inplace(scores);
            out.middleCols(h * dv, dv).noalias() = scores * value(v).middleCols(h * dv, dv);
            if (maps) maps->probs[h] = scores;
            (*probs)[h] = std::move(scores);
        }
        (void)m;
        const bool rg = requires_grad(q) || requires_grad(k) || requires_grad(v);
        return push(std::move(out), rg, [q, k, v, heads, dh, dv, inv_sqrt, probs](Tape& t, int self) {
            const Matrix& g = t.nodes_[self].grad;
            for (int h = 0; h < heads; ++h) {
                const Matrix& p = (*probs)[h];
                const auto gh = g.middleCols(h * dv, dv);
                if (t.requires_grad(v)) t.grad_ref(v).middleCols(h * dv, dv).noalias() += p.transpose() * gh;
                if (!t.requires_grad(q) && !t.requires_grad(k)) continue;
                Matrix dp = gh * t.value(v).middleCols(h * dv, dv).transpose();
                const Eigen::Matrix<S, Eigen::Dynamic, 1> rowdot = dp.cwiseProduct(p).rowwise().sum();
                Matrix ds = p.cwiseProduct(dp.colwise() - rowdot) * inv_sqrt;
                if (t.requires_grad(q)) t.grad_ref(q).middleCols(h * dh, dh).noalias() += ds * t.value(k).middleCols(h * dh, dh);
                if (t.requires_grad(k)) t.grad_ref(k).middleCols(h * dh, dh).noalias() += ds.transpose() * t.value(q).middleCols(h * dh, dh);
            }
        });
    }

    // --- shape manipulation -------------------------------------------

    Var concat_rows(const std::vector<Var>& parts) {
        Eigen::Index total = 0;
        const Eigen::Index c = cols(parts.at(0));
        bool rg = false;
        for (Var p : parts) {
            check(cols(p) == c, "concat_rows", parts[0], p);
            total += rows(p);
            rg = rg || requires_grad(p);
        }
        Matrix out(total, c);
        Eigen::Index at = 0;
        for (Var p : parts) {
            out.middleRows(at, rows(p)) = value(p);
            at += rows(p);
        }
        return push(std::move(out), rg, [parts](Tape& t, int self) {
            const Matrix& g = t.nodes_[self].grad;
            Eigen::Index at = 0;
            for (Var p : parts) {
                const Eigen::Index r = t.rows(p);
                if (t.requires_grad(p)) t.grad_ref(p) += g.middleRows(at, r);
                at += r;
            }
        });
    }

    Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count) {
        if (begin < 0 || count < 0 || begin + count > rows(a)) {
            throw ShapeError("slice_rows out of range");
        }
        Matrix out = value(a).middleRows(begin, count);
        return push(std::move(out), requires_grad(a), [a, begin, count](Tape& t, int self) {
            t.grad_ref(a).middleRows(begin, count) += t.nodes_[self].grad;
        });
    }

    Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
        if (begin < 0 || count < 0 || begin + count > cols(a)) {
            throw ShapeError("slice_cols out of range");
        }
        Matrix out = value(a).middleCols(begin, count);
        return push(std::move(out), requires_grad(a), [a, begin, count](Tape& t, int self) {
            t.grad_ref(a).middleCols(begin, count) += t.nodes_[self].grad;
        });
    }

    // 1 x cols mean over rows.
    Var mean_rows(Var a) {
        Matrix out = value(a).colwise().mean();
        return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
            const S inv = S(1) / S(t.rows(a));
            t.grad_ref(a).rowwise() += t.nodes_[self].grad.row(0) * inv;
        });
    }

    // Stacks a 1 x cols row `times` times.
    Var repeat_rows(Var a, Eigen::Index times) {
        check(rows(a) == 1, "repeat_rows", a, a);
        Matrix out = value(a).replicate(times, 1);
        return push(std::move(out), requires_grad(a), [a](Tape& t, int self) {
            t.grad_ref(a).row(0) += t.nodes_[self].grad.colwise().sum();
        });
    }

    // Row-wise dot products of two equally shaped matrices, returned as a
    // 1 x rows row scaled by `factor`.
    Var rowwise_dot(Var a, Var b, S factor) {
        check(rows(a) == rows(b) && cols(a) == cols(b), "rowwise_dot", a, b);
        Matrix out = (value(a).cwiseProduct(value(b)).rowwise().sum() * factor).transpose();
        return push(std::move(out), any(a, b), [a, b, factor](Tape& t, int self) {
            const Eigen::Array<S, Eigen::Dynamic, 1> g = t.nodes_[self].grad.row(0).transpose().array() * factor;
            if (t.requires_grad(a)) t.grad_ref(a).array() += t.value(b).array().colwise() * g;
            if (t.requires_grad(b)) t.grad_ref(b).array() += t.value(a).array().colwise() * g;
        });
    }

    // --- scalar objectives ---------------------------------------------

    // A 1x1 node whose value and gradient with respect to `input` were
    // computed outside the tape (closed-form loss terms).
    Var external_scalar(Var input, S loss, Matrix d_loss_d_input) {
        check(d_loss_d_input.rows() == rows(input) && d_loss_d_input.cols() == cols(input),
              "external_scalar", input, input);
        Matrix out(1, 1);
        out(0, 0) = loss;
        return push(std::move(out), requires_grad(input),
                    [input, d = std::move(d_loss_d_input)](Tape& t, int self) {
                        t.grad_ref(input) += d * t.nodes_[self].grad(0, 0);
                    });
    }

    // sum_i weights[i] * terms[i] over 1x1 nodes.
    Var weighted_sum(const std::vector<Var>& terms, const std::vector<S>& weights) {
        assert(terms.size() == weights.size());
        Matrix out = Matrix::Zero(1, 1);
        bool rg = false;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            check(rows(terms[i]) == 1 && cols(terms[i]) == 1, "weighted_sum", terms[i], terms[i]);
            out(0, 0) += weights[i] * value(terms[i])(0, 0);
            rg = rg || requires_grad(terms[i]);
        }
        return push(std::move(out), rg, [terms, weights](Tape& t, int self) {
            const S g = t.nodes_[self].grad(0, 0);
            for (std::size_t i = 0; i < terms.size(); ++i) {
                if (t.requires_grad(terms[i])) t.grad_ref(terms[i])(0, 0) += weights[i] * g;
            }
        });
    }

    // Seeds d(root)/d(root) = seed and propagates adjoints to every node.
    void backward(Var root, S seed = S(1)) {
        if (rows(root) != 1 || cols(root) != 1) throw ShapeError("backward requires a scalar root");
        grad_ref(root)(0, 0) += seed;
        for (int i = root.id; i >= 0; --i) {
            Node& node = nodes_[i];
            if (!node.requires_grad || node.grad.size() == 0 || !node.back) continue;
            node.back(*this, i);
        }
    }

    static void softmax_rows_inplace(Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            const S mx = m.row(r).maxCoeff();
            m.row(r) = (m.row(r).array() - mx).exp();
            m.row(r) /= m.row(r).sum();
        }
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        std::function<void(Tape&, int)> back;
    };

    Eigen::Index rows(Var v) const { return nodes_[v.id].value.rows(); }
    Eigen::Index cols(Var v) const { return nodes_[v.id].value.cols(); }
    bool any(Var a, Var b) const { return requires_grad(a) || requires_grad(b); }

    Matrix& grad_ref(Var v) {
        Node& n = nodes_[v.id];
        if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
        return n.grad;
    }

    void check(bool ok, const char* op, Var a, Var b) const {
        if (!ok) {
            throw ShapeError(std::string(op) + ": incompatible shapes " + std::to_string(rows(a)) + "x" +
                             std::to_string(cols(a)) + " and " + std::to_string(rows(b)) + "x" +
                             std::to_string(cols(b)));
        }
    }

    Var push(Matrix value, bool requires_grad, std::function<void(Tape&, int)> back) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        if (requires_grad) n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size() - 1)};
    }

    std::vector<Node> nodes_;
    bool track_kinks_ = false;
    std::uint64_t signature_ = 0;
};

}  // namespace lmr
