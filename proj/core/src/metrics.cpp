// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "lmr/errors.hpp"
#include "lmr/objectives.hpp"
#include "lmr/parallel.hpp"

namespace lmr {

RankedPredictions rank_predictions(const Mat<float>& spans, const Mat<float>& class_logits,
                                   const EpisodeRecord& episode) {
    if (spans.rows() < 1 || spans.cols() != 2 || class_logits.rows() != spans.rows() || class_logits.cols() != 2) {
        throw ShapeError("rank_predictions: expected k x 2 spans and logits");
    }
    const double d = episode.duration;
    RankedPredictions out;
    out.qid = episode.qid;
    for (Eigen::Index j = 0; j < spans.rows(); ++j) {
        const double c = spans(j, 0), w = spans(j, 1);
        ScoredMoment m;
        m.start = std::clamp((c - 0.5 * w) * d, 0.0, d);
        m.end = std::clamp((c + 0.5 * w) * d, 0.0, d);
        m.score = std::exp(double(log_foreground<float>(class_logits(j, 0), class_logits(j, 1))));
        out.moments.push_back(m);
    }
    std::stable_sort(out.moments.begin(), out.moments.end(),
                     [](const ScoredMoment& a, const ScoredMoment& b) { return a.score > b.score; });
    return out;
}

RankedPredictions rank_predictions(const ForwardOutput& fwd, const EpisodeRecord& episode) {
    return rank_predictions(fwd.moments, fwd.class_logits, episode);
}

double prediction_iou(const ScoredMoment& p, const Window& gt) {
    if (!(p.start < p.end)) return 0.0;
    return temporal_iou({p.start, p.end}, gt);
}

namespace {

std::unordered_map<std::string, const RankedPredictions*> index_by_qid(
    const std::vector<RankedPredictions>& predictions) {
    std::unordered_map<std::string, const RankedPredictions*> out;
    for (const auto& p : predictions) out[p.qid] = &p;
    return out;
}

const RankedPredictions& lookup(const std::unordered_map<std::string, const RankedPredictions*>& index,
                                const std::string& qid) {
    auto it = index.find(qid);
    if (it == index.end()) throw CoverageError("no predictions for qid " + qid);
    return *it->second;
}

}  // namespace

double recall_at_n(const std::vector<RankedPredictions>& predictions, const std::vector<EpisodeRecord>& manifest,
                   std::size_t n, double iou_threshold) {
    if (manifest.empty()) return 0.0;
    const auto index = index_by_qid(predictions);
    std::size_t hits = 0;
    for (const auto& r : manifest) {
        const auto& p = lookup(index, r.qid);
        const std::size_t top = std::min(n, p.moments.size());
        bool hit = false;
        for (std::size_t i = 0; i < top && !hit; ++i) {
            for (const auto& w : r.windows) {
                if (prediction_iou(p.moments[i], w) >= iou_threshold) {
                    hit = true;
                    break;
                }
            }
        }
        hits += hit;
    }
    return 100.0 * double(hits) / double(manifest.size());
}

double average_precision(const RankedPredictions& predictions, const std::vector<Window>& gt_windows,
                         double iou_threshold) {
    if (gt_windows.empty()) throw ValidationError("average_precision: no ground-truth windows");
    std::vector<bool> used(gt_windows.size(), false);
    std::size_t tp = 0;
    double sum = 0.0;
    for (std::size_t rank = 0; rank < predictions.moments.size(); ++rank) {
        std::size_t best = gt_windows.size();
        double best_iou = -1.0;
        for (std::size_t g = 0; g < gt_windows.size(); ++g) {
            if (used[g]) continue;
            const double iou = prediction_iou(predictions.moments[rank], gt_windows[g]);
            if (iou >= iou_threshold && iou > best_iou) {
                best = g;
                best_iou = iou;
            }
        }
        if (best == gt_windows.size()) continue;
        used[best] = true;
        ++tp;
        sum += double(tp) / double(rank + 1);
    }
    return sum / double(gt_windows.size());
}

std::vector<double> default_map_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back(double(50 + 5 * i) / 100.0);
    return t;
}

double MapResult::at(double threshold) const {
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (std::abs(thresholds[i] - threshold) < 1e-9) return map[i];
    }
    throw ValidationError("threshold " + std::to_string(threshold) + " not in the mAP grid");
}

MapResult map_over_thresholds(const std::vector<RankedPredictions>& predictions,
                              const std::vector<EpisodeRecord>& manifest, const std::vector<double>& thresholds) {
    MapResult out;
    out.thresholds = thresholds;
    const auto index = index_by_qid(predictions);
    for (double t : thresholds) {
        double sum = 0.0;
        for (const auto& r : manifest) sum += average_precision(lookup(index, r.qid), r.windows, t);
        out.map.push_back(manifest.empty() ? 0.0 : 100.0 * sum / double(manifest.size()));
    }
    if (!out.map.empty()) out.average = std::accumulate(out.map.begin(), out.map.end(), 0.0) / double(out.map.size());
    return out;
}

EvalReport evaluate(const std::vector<RankedPredictions>& predictions, const std::vector<EpisodeRecord>& manifest) {
    EvalReport r;
    r.queries = manifest.size();
    r.r1_05 = recall_at_n(predictions, manifest, 1, 0.5);
    r.r1_07 = recall_at_n(predictions, manifest, 1, 0.7);
    r.r5_05 = recall_at_n(predictions, manifest, 5, 0.5);
    r.r5_07 = recall_at_n(predictions, manifest, 5, 0.7);
    const auto m = map_over_thresholds(predictions, manifest);
    r.map_05 = m.at(0.5);
    r.map_075 = m.at(0.75);
    r.map_avg = m.average;
    return r;
}

std::string report_csv(const EvalReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s\n%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f\n", kReportColumns, r.r1_05, r.r1_07,
                  r.r5_05, r.r5_07, r.map_05, r.map_075, r.map_avg);
    return buf;
}

std::string report_table(const EvalReport& r) {
    const char* names[] = {"R1@0.5", "R1@0.7", "R5@0.5", "R5@0.7", "mAP@0.5", "mAP@0.75", "mAP_avg"};
    const double values[] = {r.r1_05, r.r1_07, r.r5_05, r.r5_07, r.map_05, r.map_075, r.map_avg};
    std::string head, row;
    char buf[32];
    for (int i = 0; i < 7; ++i) {
        std::snprintf(buf, sizeof buf, "%10s", names[i]);
        head += buf;
        std::snprintf(buf, sizeof buf, "%10.2f", values[i]);
        row += buf;
    }
    return head + "\n" + row + "\n" + "queries: " + std::to_string(r.queries) + "\n";
}

std::vector<RankedPredictions> predict(const ModelConfig& model, const ModelParams& params,
                                       const std::vector<Sample>& samples, std::size_t threads) {
    std::vector<RankedPredictions> out(samples.size());
    parallel_for(samples.size(), thread_budget(threads), [&](std::size_t i) {
        const auto& s = samples[i];
        const auto fwd = forward<float>(model, params, s.visual, s.context, s.query);
        out[i] = rank_predictions(fwd, s.record);
    });
    return out;
}

void write_predictions(const std::vector<RankedPredictions>& predictions, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& p : predictions) {
        nlohmann::ordered_json j;
        j["qid"] = p.qid;
        auto arr = nlohmann::ordered_json::array();
        for (const auto& m : p.moments) arr.push_back({m.start, m.end, m.score});
        j["predictions"] = arr;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace lmr
