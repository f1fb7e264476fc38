// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lmr/errors.hpp"
#include "lmr/objectives.hpp"

using namespace lmr;
using M = Mat<double>;

namespace {

// Oracles written from the interval definitions.
double oracle_iou(double a0, double a1, double b0, double b1) {
    const double inter = std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
    return inter / ((a1 - a0) + (b1 - b0) - inter);
}

double oracle_giou(double a0, double a1, double b0, double b1) {
    const double inter = std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
    const double uni = (a1 - a0) + (b1 - b0) - inter;
    const double hull = std::max(a1, b1) - std::min(a0, b0);
    return inter / uni - (hull - uni) / hull;
}

double log_softmax_fg(double fg, double bg) {
    const double m = std::max(fg, bg);
    return fg - m - std::log(std::exp(fg - m) + std::exp(bg - m));
}

double oracle_cost(const M& spans, const M& logits, Eigen::Index i, double gc, double gw, const LossWeights& w) {
    const double c = spans(i, 0), wd = spans(i, 1);
    return w.l1 * std::abs(c - gc) + w.iou * (1 - oracle_giou(c - wd / 2, c + wd / 2, gc - gw / 2, gc + gw / 2)) -
           w.ce * log_softmax_fg(logits(i, 0), logits(i, 1));
}

// Full l_mr from scratch for one assignment.
double oracle_l_mr(const M& spans, const M& logits, double gc, double gw, const LossWeights& w) {
    Eigen::Index best = 0;
    double best_cost = oracle_cost(spans, logits, 0, gc, gw, w);
    for (Eigen::Index i = 1; i < spans.rows(); ++i) {
        const double c = oracle_cost(spans, logits, i, gc, gw, w);
        if (c < best_cost) best_cost = c, best = i;
    }
    const double c = spans(best, 0), wd = spans(best, 1);
    const double l1 = std::abs(c - gc) + std::abs(wd - gw);
    const double giou = oracle_giou(c - wd / 2, c + wd / 2, gc - gw / 2, gc + gw / 2);
    double ce = 0;
    for (Eigen::Index i = 0; i < spans.rows(); ++i) {
        const double lf = log_softmax_fg(logits(i, 0), logits(i, 1));
        ce -= i == best ? lf : std::log1p(-std::exp(lf));
    }
    ce /= double(spans.rows());
    return w.l1 * l1 + w.iou * (1 - giou) + w.ce * ce;
}

struct Instance {
    M spans, logits;
    double gc, gw;
};

Instance random_instance(std::mt19937_64& rng, Eigen::Index k) {
    std::uniform_real_distribution<double> u(0.05, 0.95), l(-3, 3);
    Instance in{M(k, 2), M(k, 2), u(rng), 0};
    in.gw = std::min(0.3 * u(rng), 2 * std::min(in.gc, 1 - in.gc));
    for (Eigen::Index i = 0; i < k; ++i) {
        in.spans(i, 0) = u(rng);
        in.spans(i, 1) = 0.3 * u(rng);
        in.logits(i, 0) = l(rng);
        in.logits(i, 1) = l(rng);
    }
    return in;
}

}  // namespace

TEST_CASE("temporal IoU examples") {
    CHECK(temporal_iou({0, 10}, {0, 10}) == 1.0);
    CHECK(temporal_iou({0, 10}, {10, 20}) == 0.0);
    CHECK(temporal_iou({0, 10}, {5, 15}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(temporal_iou({3, 3}, {0, 1}), ValidationError);
    CHECK_THROWS_AS(temporal_iou({0, 1}, {2, 1}), ValidationError);
}

TEST_CASE("generalized IoU examples") {
    CHECK(giou_1d({2, 5}, {2, 5}) == 1.0);
    CHECK(giou_1d({0, 1}, {2, 3}) == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
    CHECK(giou_1d({0, 1}, {9, 10}) == doctest::Approx(-0.8).epsilon(1e-15));
    CHECK_THROWS_AS(giou_1d({1, 0}, {0, 1}), ValidationError);
}

TEST_CASE("IoU and gIoU properties over random segments") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 100);
    for (int i = 0; i < 5000; ++i) {
        double a0 = u(rng), a1 = u(rng), b0 = u(rng), b1 = u(rng);
        if (a0 == a1 || b0 == b1) continue;
        if (a0 > a1) std::swap(a0, a1);
        if (b0 > b1) std::swap(b0, b1);
        const double iou = temporal_iou({a0, a1}, {b0, b1});
        const double giou = giou_1d({a0, a1}, {b0, b1});
        CHECK(iou == doctest::Approx(oracle_iou(a0, a1, b0, b1)).epsilon(1e-12));
        CHECK(giou == doctest::Approx(oracle_giou(a0, a1, b0, b1)).epsilon(1e-12));
        CHECK(iou == temporal_iou({b0, b1}, {a0, a1}));
        CHECK(iou >= 0.0);
        CHECK(iou <= 1.0);
        CHECK(giou <= iou + 1e-15);
        CHECK(giou > -1.0);
        // Equality iff the hull is the union, i.e. the segments overlap or touch.
        const bool overlapping = std::min(a1, b1) >= std::max(a0, b0);
        CHECK((std::abs(giou - iou) < 1e-12) == overlapping);
    }
    CHECK(temporal_iou({1, 4}, {1, 4}) == 1.0);
    CHECK(temporal_iou({1, 4}, {1, 4.0001}) < 1.0);
}

TEST_CASE("span and window conversions are inverse") {
    const auto [c, w] = window_to_span({30, 50}, 80);
    CHECK(c == doctest::Approx(0.5));
    CHECK(w == doctest::Approx(0.25));
    const Window back = span_to_window(c, w);
    CHECK(back.start * 80 == doctest::Approx(30));
    CHECK(back.end * 80 == doctest::Approx(50));
}

TEST_CASE("moment loss arithmetic with the default weights") {
    const LossWeights w;
    CHECK(w.l1 == 10);
    CHECK(w.iou == 1);
    CHECK(w.ce == 4);
    CHECK(w.mr == 1);
    CHECK(w.cont == 1);
    CHECK(std::abs(moment_loss_value(0.1, 0.25, 0.2, w) - 2.05) < 1e-9);
    CHECK(std::abs(total_loss_value(2.05, 0.69, w) - 2.74) < 1e-9);
    LossWeights no_cont;
    no_cont.cont = 0;
    CHECK(total_loss_value(2.05, 0.69, no_cont) == 2.05);
    CHECK(total_loss_value(0, 0, w) == 0);
    LossWeights bad;
    bad.ce = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("perfect predictions give zero moment loss") {
    M spans(2, 2), logits(2, 2);
    spans << 0.4, 0.2, 0.9, 0.05;
    logits << 60, -60, -60, 60;
    const auto ml = moment_loss<double>(spans, logits, 0.4, 0.2, LossWeights{});
    CHECK(ml.parts.matched_query_index == 0);
    CHECK(ml.parts.l1 == 0.0);
    CHECK(ml.parts.giou == doctest::Approx(0.0).scale(1e-12));
    CHECK(ml.parts.ce < 1e-20);
    CHECK(ml.l_mr < 1e-12);
}

TEST_CASE("moment loss agrees with a from-scratch oracle") {
    std::mt19937_64 rng(2);
    const LossWeights w;
    for (int t = 0; t < 500; ++t) {
        const auto in = random_instance(rng, 1 + t % 6);
        const auto ml = moment_loss<double>(in.spans, in.logits, in.gc, in.gw, w);
        CHECK(ml.l_mr == doctest::Approx(oracle_l_mr(in.spans, in.logits, in.gc, in.gw, w)).epsilon(1e-12));
        CHECK(ml.parts.l_mr == doctest::Approx(moment_loss_value(ml.parts.l1, ml.parts.giou, ml.parts.ce, w)));
        CHECK(ml.parts.l1 >= 0);
        CHECK(ml.parts.ce >= 0);
        CHECK(ml.parts.giou >= 0);
        CHECK(ml.parts.giou <= 2);
    }
}

TEST_CASE("match_target rules") {
    const LossWeights w;
    std::mt19937_64 rng(3);
    SUBCASE("k = 1 always picks 0") {
        for (int t = 0; t < 20; ++t) {
            const auto in = random_instance(rng, 1);
            CHECK(match_target<double>(in.spans, in.logits, in.gc, in.gw, w) == 0);
        }
    }
    SUBCASE("exact confident match wins") {
        M spans(3, 2), logits(3, 2);
        spans << 0.1, 0.05, 0.5, 0.2, 0.9, 0.05;
        const double p = std::log(0.99 / 0.01);
        logits << 0, p, p, 0, 0, p;
        CHECK(match_target<double>(spans, logits, 0.5, 0.2, w) == 1);
    }
    SUBCASE("ties go to the lowest index") {
        M spans(3, 2), logits = M::Zero(3, 2);
        spans << 0.3, 0.1, 0.3, 0.1, 0.3, 0.1;
        CHECK(match_target<double>(spans, logits, 0.6, 0.2, w) == 0);
    }
    SUBCASE("agrees with exhaustive enumeration") {
        for (int t = 0; t < 300; ++t) {
            const auto in = random_instance(rng, 5);
            Eigen::Index best = 0;
            for (Eigen::Index i = 1; i < 5; ++i)
                if (oracle_cost(in.spans, in.logits, i, in.gc, in.gw, w) <
                    oracle_cost(in.spans, in.logits, best, in.gc, in.gw, w))
                    best = i;
            CHECK(match_target<double>(in.spans, in.logits, in.gc, in.gw, w) == std::size_t(best));
        }
    }
    SUBCASE("a shared cost offset leaves the choice unchanged") {
        std::uniform_real_distribution<double> shift(-50, 50);
        for (int t = 0; t < 200; ++t) {
            const auto in = random_instance(rng, 4);
            auto costs = matching_costs<double>(in.spans, in.logits, in.gc, in.gw, w);
            const auto base = match_target<double>(in.spans, in.logits, in.gc, in.gw, w);
            CHECK(argmin_first<double>(costs) == base);
            const double c = shift(rng);
            for (auto& x : costs) x += c;
            CHECK(argmin_first<double>(costs) == base);
        }
        const std::vector<double> tied{2.0, 1.0, 1.0};
        CHECK(argmin_first<double>(tied) == 1);
    }
}

TEST_CASE("moment loss gradients match central differences away from kinks") {
    std::mt19937_64 rng(4);
    const LossWeights w;
    int checked = 0;
    for (int t = 0; t < 400 && checked < 100; ++t) {
        const auto in = random_instance(rng, 3);
        const auto base = moment_loss<double>(in.spans, in.logits, in.gc, in.gw, w);
        const double h = 1e-6;
        bool kink = false;
        M num_s(3, 2), num_l(3, 2);
        for (int which = 0; which < 2 && !kink; ++which) {
            for (Eigen::Index i = 0; i < 6 && !kink; ++i) {
                M s = in.spans, l = in.logits;
                M& target = which == 0 ? s : l;
                const double x = target.data()[i];
                target.data()[i] = x + h;
                const auto up = moment_loss<double>(s, l, in.gc, in.gw, w);
                target.data()[i] = x - h;
                const auto down = moment_loss<double>(s, l, in.gc, in.gw, w);
                if (up.signature != base.signature || down.signature != base.signature) kink = true;
                (which == 0 ? num_s : num_l).data()[i] = (up.l_mr - down.l_mr) / (2 * h);
            }
        }
        if (kink) continue;
        ++checked;
        for (Eigen::Index i = 0; i < 6; ++i) {
            CHECK(base.d_spans.data()[i] == doctest::Approx(num_s.data()[i]).epsilon(1e-4).scale(1e-6));
            CHECK(base.d_logits.data()[i] == doctest::Approx(num_l.data()[i]).epsilon(1e-4).scale(1e-6));
        }
    }
    CHECK(checked == 100);
}

TEST_CASE("span terms handle the kink consistently") {
    const auto t = l1_term<double>(0.5, 0.2, 0.5, 0.2);
    CHECK(t.value == 0.0);
    CHECK(t.d_center == 0.0);
    CHECK(t.d_width == 0.0);
    const auto g = giou_loss_term<double>(0.5, 0.2, 0.5, 0.2);
    CHECK(g.value == doctest::Approx(0.0).scale(1e-15));
}

TEST_CASE("contrastive loss values") {
    const std::vector<double> zero{0.0};
    CHECK(contrastive_loss<double>(zero).value == doctest::Approx(0.6931471805599453).epsilon(1e-15));
    const std::vector<double> low{-20.0};
    CHECK(contrastive_loss<double>(low).value == doctest::Approx(2.0611536e-9).epsilon(1e-6));
    const std::vector<double> high{800.0};
    const auto h = contrastive_loss<double>(high);
    CHECK(std::isfinite(h.value));
    CHECK(h.value == doctest::Approx(800.0));
    double prev = -1;
    for (double s = -40; s <= 40; s += 0.25) {
        const std::vector<double> one{s};
        const double v = contrastive_loss<double>(one).value;
        CHECK(v > prev);
        CHECK(v >= 0);
        prev = v;
    }
    const std::vector<double> many{-1.0, 0.5, 2.0};
    const auto m = contrastive_loss<double>(many);
    CHECK(m.value == doctest::Approx((std::log1p(std::exp(-1.0)) + std::log1p(std::exp(0.5)) +
                                      std::log1p(std::exp(2.0))) / 3));
    for (std::size_t i = 0; i < many.size(); ++i) {
        auto up = many, down = many;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        const double num = (contrastive_loss<double>(up).value - contrastive_loss<double>(down).value) / 2e-6;
        CHECK(m.d_scores[i] == doctest::Approx(num).epsilon(1e-6));
    }
    CHECK(contrastive_loss<double>(std::vector<double>{}).value == 0.0);
}

TEST_CASE("positive saliency loss mirrors the contrastive term") {
    const std::vector<double> s{-1.5, 0.0, 3.0};
    const auto p = positive_saliency_loss<double>(s);
    std::vector<double> neg(s.size());
    std::transform(s.begin(), s.end(), neg.begin(), [](double x) { return -x; });
    const auto c = contrastive_loss<double>(neg);
    CHECK(p.value == doctest::Approx(c.value).epsilon(1e-15));
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(p.d_scores[i] == doctest::Approx(-c.d_scores[i]));
}
