// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Retrieval metrics: R@n at an IoU threshold and mAP over a threshold grid.
// Percentages are reported on a 0..100 scale.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lmr/dataset.hpp"
#include "lmr/manifest.hpp"
#include "lmr/network.hpp"

namespace lmr {

struct ScoredMoment {
    double start = 0.0;  // seconds
    double end = 0.0;
    double score = 0.0;

    friend bool operator==(const ScoredMoment&, const ScoredMoment&) = default;
};

struct RankedPredictions {
    std::string qid;
    std::vector<ScoredMoment> moments;  // score descending
};

// Seconds and foreground probabilities for the k predicted moments, sorted by
// score with ties kept in query order.
RankedPredictions rank_predictions(const Mat<float>& spans, const Mat<float>& class_logits,
                                   const EpisodeRecord& episode);
RankedPredictions rank_predictions(const ForwardOutput& fwd, const EpisodeRecord& episode);

// IoU that treats an empty or inverted prediction as non-overlapping.
double prediction_iou(const ScoredMoment& p, const Window& gt);

// Throws CoverageError when a manifest qid has no predictions.
double recall_at_n(const std::vector<RankedPredictions>& predictions, const std::vector<EpisodeRecord>& manifest,
                   std::size_t n, double iou_threshold);

// Greedy score-order matching, each ground-truth window used once.
double average_precision(const RankedPredictions& predictions, const std::vector<Window>& gt_windows,
                         double iou_threshold);

std::vector<double> default_map_thresholds();  // 0.50, 0.55, ..., 0.95

struct MapResult {
    std::vector<double> thresholds;
    std::vector<double> map;  // percent, one per threshold
    double average = 0.0;     // percent

    double at(double threshold) const;
};

MapResult map_over_thresholds(const std::vector<RankedPredictions>& predictions,
                              const std::vector<EpisodeRecord>& manifest,
                              const std::vector<double>& thresholds = default_map_thresholds());

struct EvalReport {
    std::size_t queries = 0;
    double r1_05 = 0.0;
    double r1_07 = 0.0;
    double r5_05 = 0.0;
    double r5_07 = 0.0;
    double map_05 = 0.0;
    double map_075 = 0.0;
    double map_avg = 0.0;
};

EvalReport evaluate(const std::vector<RankedPredictions>& predictions, const std::vector<EpisodeRecord>& manifest);

inline constexpr const char* kReportColumns = "R1@0.5,R1@0.7,R5@0.5,R5@0.7,mAP@0.5,mAP@0.75,mAP_avg";

std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);

// Inference over a dataset with dropout off.
std::vector<RankedPredictions> predict(const ModelConfig& model, const ModelParams& params,
                                       const std::vector<Sample>& samples, std::size_t threads = 1);

// {qid, predictions: [[start, end, score], ...]} per line.
void write_predictions(const std::vector<RankedPredictions>& predictions, const std::filesystem::path& path);

}  // namespace lmr
