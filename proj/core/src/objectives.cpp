// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lmr/errors.hpp"

namespace lmr {

namespace {

void check_segment(const Window& w, const char* what) {
    if (!(w.start < w.end)) {
        throw ValidationError(std::string(what) + ": degenerate segment [" + std::to_string(w.start) + ", " +
                              std::to_string(w.end) + "]");
    }
}

}  // namespace

void LossWeights::validate() const {
    const double all[] = {l1, iou, ce, mr, cont};
    for (double v : all) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and >= 0");
    }
}

double temporal_iou(const Window& a, const Window& b) {
    check_segment(a, "temporal_iou");
    check_segment(b, "temporal_iou");
    const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
    const double uni = (a.end - a.start) + (b.end - b.start) - inter;
    return inter / uni;
}

double giou_1d(const Window& a, const Window& b) {
    check_segment(a, "giou_1d");
    check_segment(b, "giou_1d");
    const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
    const double uni = (a.end - a.start) + (b.end - b.start) - inter;
    const double hull = std::max(a.end, b.end) - std::min(a.start, b.start);
    return inter / uni - (hull - uni) / hull;
}

Window span_to_window(double center, double width) {
    return {center - 0.5 * width, center + 0.5 * width};
}

std::pair<double, double> window_to_span(const Window& w, double duration) {
    if (!(duration > 0.0)) throw ValidationError("window_to_span: duration must be positive");
    return {0.5 * (w.start + w.end) / duration, (w.end - w.start) / duration};
}

template <typename S>
SpanTerm<S> l1_term(S center, S width, S gt_center, S gt_width) {
    SpanTerm<S> t;
    const S dc = center - gt_center;
    const S dw = width - gt_width;
    t.value = std::abs(dc) + std::abs(dw);
    // Subgradient 0 exactly at the kink.
    t.d_center = dc > S(0) ? S(1) : (dc < S(0) ? S(-1) : S(0));
    t.d_width = dw > S(0) ? S(1) : (dw < S(0) ? S(-1) : S(0));
    t.branches = std::uint64_t(dc > S(0)) | std::uint64_t(dc < S(0)) << 1 | std::uint64_t(dw > S(0)) << 2 |
                 std::uint64_t(dw < S(0)) << 3;
    return t;
}

template <typename S>
SpanTerm<S> giou_loss_term(S center, S width, S gt_center, S gt_width) {
    if (!std::isfinite(center) || !std::isfinite(width)) {
        const S nan = std::numeric_limits<S>::quiet_NaN();
        return {nan, nan, nan, 0};
    }
    const S s1 = center - width / S(2), e1 = center + width / S(2);
    const S s2 = gt_center - gt_width / S(2), e2 = gt_center + gt_width / S(2);
    if (!(s1 < e1) || !(s2 < e2)) throw ValidationError("giou_loss_term: degenerate segment");

    const bool e1_inner = e1 < e2;  // min(e1, e2) == e1
    const bool s1_inner = s1 > s2;  // max(s1, s2) == s1
    const S raw_inter = (e1_inner ? e1 : e2) - (s1_inner ? s1 : s2);
    const bool overlap = raw_inter > S(0);
    const S inter = overlap ? raw_inter : S(0);
    const S uni = (e1 - s1) + (e2 - s2) - inter;
    const bool e1_outer = e1 > e2;  // max(e1, e2) == e1
    const bool s1_outer = s1 < s2;  // min(s1, s2) == s1
    const S hull = (e1_outer ? e1 : e2) - (s1_outer ? s1 : s2);

    // Derivatives w.r.t. s1 and e1.
    const S di_de = overlap && e1_inner ? S(1) : S(0);
    const S di_ds = overlap && s1_inner ? S(-1) : S(0);
    const S du_de = S(1) - di_de;
    const S du_ds = S(-1) - di_ds;
    const S dh_de = e1_outer ? S(1) : S(0);
    const S dh_ds = s1_outer ? S(-1) : S(0);

    // giou = inter/uni - 1 + uni/hull
    auto dg = [&](S di, S du, S dh) {
        return (di * uni - inter * du) / (uni * uni) + (du * hull - uni * dh) / (hull * hull);
    };
    const S dg_de = dg(di_de, du_de, dh_de);
    const S dg_ds = dg(di_ds, du_ds, dh_ds);

    SpanTerm<S> t;
    t.value = S(1) - (inter / uni - S(1) + uni / hull);
    t.d_center = -(dg_ds + dg_de);
    t.d_width = -(dg_de - dg_ds) / S(2);
    t.branches = std::uint64_t(e1_inner) | std::uint64_t(s1_inner) << 1 | std::uint64_t(overlap) << 2 |
                 std::uint64_t(e1_outer) << 3 | std::uint64_t(s1_outer) << 4;
    return t;
}

template <typename S>
S log_foreground(S fg_logit, S bg_logit) {
    const S m = std::max(fg_logit, bg_logit);
    return fg_logit - (m + std::log(std::exp(fg_logit - m) + std::exp(bg_logit - m)));
}

template <typename S>
std::vector<S> matching_costs(const Mat<S>& spans, const Mat<S>& class_logits, S gt_center, S gt_width,
                              const LossWeights& w) {
    if (spans.rows() < 1 || spans.cols() != 2 || class_logits.rows() != spans.rows() || class_logits.cols() != 2) {
        throw ShapeError("match_target: expected k x 2 spans and logits");
    }
    std::vector<S> costs(static_cast<std::size_t>(spans.rows()));
    for (Eigen::Index j = 0; j < spans.rows(); ++j) {
        const S c = spans(j, 0), width = spans(j, 1);
        costs[static_cast<std::size_t>(j)] = S(w.l1) * std::abs(c - gt_center) +
                                             S(w.iou) * giou_loss_term<S>(c, width, gt_center, gt_width).value -
                                             S(w.ce) * log_foreground<S>(class_logits(j, 0), class_logits(j, 1));
    }
    return costs;
}

template <typename S>
std::size_t argmin_first(std::span<const S> costs) {
    if (costs.empty()) throw ShapeError("argmin_first: no candidates");
    std::size_t best = 0;
    for (std::size_t j = 1; j < costs.size(); ++j) {
        if (costs[j] < costs[best]) best = j;
    }
    return best;
}

template <typename S>
std::size_t match_target(const Mat<S>& spans, const Mat<S>& class_logits, S gt_center, S gt_width,
                         const LossWeights& w) {
    const auto costs = matching_costs<S>(spans, class_logits, gt_center, gt_width, w);
    return argmin_first<S>(costs);
}

double moment_loss_value(double l1, double giou_loss, double ce, const LossWeights& w) {
    return w.l1 * l1 + w.iou * giou_loss + w.ce * ce;
}

double total_loss_value(double l_mr, double l_cont, const LossWeights& w) {
    return w.mr * l_mr + w.cont * l_cont;
}

template <typename S>
MomentLoss<S> moment_loss(const Mat<S>& spans, const Mat<S>& class_logits, S gt_center, S gt_width,
                          const LossWeights& w) {
    const std::size_t j = match_target<S>(spans, class_logits, gt_center, gt_width, w);
    const Eigen::Index k = spans.rows();
    MomentLoss<S> out;
    out.d_spans = Mat<S>::Zero(k, 2);
    out.d_logits = Mat<S>::Zero(k, 2);

    const auto l1 = l1_term<S>(spans(j, 0), spans(j, 1), gt_center, gt_width);
    const auto gl = giou_loss_term<S>(spans(j, 0), spans(j, 1), gt_center, gt_width);

    S ce = S(0);
    for (Eigen::Index q = 0; q < k; ++q) {
        const S a = class_logits(q, 0), b = class_logits(q, 1);
        const S m = std::max(a, b);
        const S lse = m + std::log(std::exp(a - m) + std::exp(b - m));
        const S p_fg = std::exp(a - lse);
        const bool fg = q == static_cast<Eigen::Index>(j);
        ce += lse - (fg ? a : b);
        out.d_logits(q, 0) = (p_fg - (fg ? S(1) : S(0))) / S(k);
        out.d_logits(q, 1) = ((S(1) - p_fg) - (fg ? S(0) : S(1))) / S(k);
    }
    ce /= S(k);

    out.d_spans(j, 0) = S(w.l1) * l1.d_center + S(w.iou) * gl.d_center;
    out.d_spans(j, 1) = S(w.l1) * l1.d_width + S(w.iou) * gl.d_width;
    out.d_logits *= S(w.ce);

    out.l_mr = S(w.l1) * l1.value + S(w.iou) * gl.value + S(w.ce) * ce;
    out.parts.l1 = double(l1.value);
    out.parts.giou = double(gl.value);
    out.parts.ce = double(ce);
    out.parts.l_mr = double(out.l_mr);
    out.parts.matched_query_index = j;
    out.signature = (std::uint64_t(j) << 16) ^ (l1.branches << 8) ^ gl.branches;
    return out;
}

template <typename S>
S softplus(S x) {
    return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename S>
ScoreLoss<S> contrastive_loss(std::span<const S> negative_scores) {
    ScoreLoss<S> out;
    if (negative_scores.empty()) return out;
    const S n = S(negative_scores.size());
    out.d_scores.resize(negative_scores.size());
    for (std::size_t i = 0; i < negative_scores.size(); ++i) {
        const S s = negative_scores[i];
        out.value += softplus(s);
        out.d_scores[i] = S(1) / (S(1) + std::exp(-s)) / n;
    }
    out.value /= n;
    return out;
}

template <typename S>
ScoreLoss<S> positive_saliency_loss(std::span<const S> positive_scores) {
    ScoreLoss<S> out;
    if (positive_scores.empty()) return out;
    const S n = S(positive_scores.size());
    out.d_scores.resize(positive_scores.size());
    for (std::size_t i = 0; i < positive_scores.size(); ++i) {
        const S s = positive_scores[i];
        out.value += softplus(-s);
        out.d_scores[i] = -S(1) / (S(1) + std::exp(s)) / n;
    }
    out.value /= n;
    return out;
}

#define LMR_INSTANTIATE(S)                                                                                 \
    template SpanTerm<S> l1_term<S>(S, S, S, S);                                                           \
    template SpanTerm<S> giou_loss_term<S>(S, S, S, S);                                                    \
    template S log_foreground<S>(S, S);                                                                    \
    template std::vector<S> matching_costs<S>(const Mat<S>&, const Mat<S>&, S, S, const LossWeights&);   \
    template std::size_t argmin_first<S>(std::span<const S>);                                              \
    template std::size_t match_target<S>(const Mat<S>&, const Mat<S>&, S, S, const LossWeights&);          \
    template MomentLoss<S> moment_loss<S>(const Mat<S>&, const Mat<S>&, S, S, const LossWeights&);         \
    template ScoreLoss<S> contrastive_loss<S>(std::span<const S>);                                         \
    template ScoreLoss<S> positive_saliency_loss<S>(std::span<const S>);                                   \
    template S softplus<S>(S);

LMR_INSTANTIATE(float)
LMR_INSTANTIATE(double)
#undef LMR_INSTANTIATE

}  // namespace lmr
