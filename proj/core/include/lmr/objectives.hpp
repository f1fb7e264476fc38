// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Interval overlap measures, the query assignment rule and every loss term.
// Moments are (center, width) pairs in normalized [0, 1] video time.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lmr/manifest.hpp"
#include "lmr/tape.hpp"

namespace lmr {

struct LossWeights {
    double l1 = 10.0;
    double iou = 1.0;
    double ce = 4.0;
    double mr = 1.0;
    double cont = 1.0;
    // Adds mean -log(sigmoid(S)) over the clips inside the target window.
    bool positive_saliency = false;

    void validate() const;
};

struct LossBreakdown {
    double l1 = 0.0;
    double giou = 0.0;  // 1 - gIoU of the matched prediction
    double ce = 0.0;
    double l_mr = 0.0;
    double l_cont = 0.0;
    double total = 0.0;
    std::size_t matched_query_index = 0;
};

// Throws ValidationError when either segment has start >= end.
double temporal_iou(const Window& a, const Window& b);
double giou_1d(const Window& a, const Window& b);

Window span_to_window(double center, double width);
// (center, width) of a window expressed in units of `duration`.
std::pair<double, double> window_to_span(const Window& w, double duration);

// Value and partial derivatives of a scalar term w.r.t. a predicted
// (center, width). `branches` encodes which side of every min/max/abs the
// evaluation took.
template <typename S>
struct SpanTerm {
    S value = S(0);
    S d_center = S(0);
    S d_width = S(0);
    std::uint64_t branches = 0;
};

template <typename S>
SpanTerm<S> l1_term(S center, S width, S gt_center, S gt_width);
// 1 - gIoU between the predicted span and the target span.
template <typename S>
SpanTerm<S> giou_loss_term(S center, S width, S gt_center, S gt_width);

// log p(foreground) for one row of (fg, bg) logits.
template <typename S>
S log_foreground(S fg_logit, S bg_logit);

// Per-query assignment cost
//   l1 * |c - c_gt| + iou * (1 - gIoU) - ce * log p(fg).
template <typename S>
std::vector<S> matching_costs(const Mat<S>& spans, const Mat<S>& class_logits, S gt_center, S gt_width,
                              const LossWeights& w);

// Index of the smallest cost, lowest index on ties.
template <typename S>
std::size_t argmin_first(std::span<const S> costs);

// Minimum-cost query for a single target:
//   l1 * |c - c_gt| + iou * (1 - gIoU) - ce * log p(fg), lowest index on ties.
template <typename S>
std::size_t match_target(const Mat<S>& spans, const Mat<S>& class_logits, S gt_center, S gt_width,
                         const LossWeights& w);

// l1 * l1 + iou * giou_loss + ce * ce.
double moment_loss_value(double l1, double giou_loss, double ce, const LossWeights& w);
double total_loss_value(double l_mr, double l_cont, const LossWeights& w);

template <typename S>
struct MomentLoss {
    LossBreakdown parts;  // l1, giou, ce, l_mr, matched_query_index
    S l_mr = S(0);
    Mat<S> d_spans;   // d l_mr / d spans, k x 2
    Mat<S> d_logits;  // d l_mr / d class_logits, k x 2
    std::uint64_t signature = 0;
};

// Matching plus the weighted moment loss over all k queries.
template <typename S>
MomentLoss<S> moment_loss(const Mat<S>& spans, const Mat<S>& class_logits, S gt_center, S gt_width,
                          const LossWeights& w);

template <typename S>
struct ScoreLoss {
    S value = S(0);
    std::vector<S> d_scores;
};

// mean of -log(1 - sigmoid(s)).
template <typename S>
ScoreLoss<S> contrastive_loss(std::span<const S> negative_scores);
// mean of -log(sigmoid(s)).
template <typename S>
ScoreLoss<S> positive_saliency_loss(std::span<const S> positive_scores);

template <typename S>
S softplus(S x);

}  // namespace lmr
