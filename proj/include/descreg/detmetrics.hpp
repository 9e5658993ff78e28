#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "descreg/alignment.hpp"
#include "descreg/catalog.hpp"
#include "descreg/regions.hpp"

namespace descreg {

/// Intersection over union; zero-area boxes overlap nothing.
double iou(const Box& a, const Box& b);

struct MatchResult {
    std::vector<bool> tp;          // per detection, in input order
    std::vector<bool> gt_matched;  // per ground truth, in input order
};

/// Greedy matching of one class's detections, which must already be in
/// descending score order. Each detection takes the highest-IoU unmatched
/// ground truth of its image with IoU >= threshold.
MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, double iou_thresh);

/// Stable sort by descending score (ties keep input order).
std::vector<Detection> sorted_by_score(std::span<const Detection> dets);

/// All-points interpolated AP from ranked TP/FP flags. Zero when n_gt == 0.
double average_precision(const std::vector<bool>& tp_flags, std::size_t n_gt);

/// Fraction of ground truths matched after keeping the top-k detections per
/// image (all classes pooled) and matching class by class.
double recall_at_k(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, double iou_thresh,
                   std::size_t k = 100);

/// 2su / (s + u); 0 when s + u == 0.
double harmonic_mean(double seen, double unseen);

struct SubsetMetrics {
    double map = 0.0;
    std::map<double, double> recall;  // IoU threshold -> recall@k
};

struct EvalReport {
    Setting setting = Setting::GZSD;
    double iou = 0.5;
    std::size_t k = 100;
    std::map<std::string, double> class_ap;  // evaluated classes only
    SubsetMetrics seen;                      // GZSD only
    SubsetMetrics unseen;
    double map_hm = 0.0;                     // GZSD only
    std::map<double, double> recall_hm;      // GZSD only
    std::size_t images = 0;                  // images evaluated
};

struct EvalOptions {
    double iou = 0.5;
    std::size_t k = 100;
    std::vector<double> recall_ious{0.4, 0.5, 0.6};
};

/// ZSD: unseen classes on images whose ground truth is entirely unseen.
/// GZSD: seen and unseen subsets over all images, combined by harmonic mean.
EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, const ClassSplit& split,
                    Setting setting, const EvalOptions& options = {});

/// Flat `key = value` text; metrics are reported as percentages.
std::string format_report(const EvalReport& report);

/// class,ap rows (percentages) in split order.
std::string format_ap_csv(const EvalReport& report, const ClassSplit& split);

}  // namespace descreg
