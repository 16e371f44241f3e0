#pragma once

#include <cstdint>
#include <vector>

#include "shearo/datamodel/datamodel.hpp"

namespace shearo::eval {

using datamodel::BoundingBox;

struct ScoredBox {
  BoundingBox box;
  double confidence = 0.0;
};

/// Intersection over union of two axis-aligned boxes; 0 when disjoint.
double iou(const BoundingBox& a, const BoundingBox& b);

struct MatchResult {
  std::vector<bool> true_positive;    // aligned with the input prediction order
  std::vector<std::int64_t> matched_gt;  // ground-truth index per prediction, -1 for FP
  std::int64_t unmatched_ground_truth = 0;
};

/// Greedy matching: predictions in descending confidence, each taking the
/// unmatched ground truth with the highest IoU >= threshold; at most one
/// prediction matches a ground truth.
MatchResult match_detections(const std::vector<ScoredBox>& predictions,
                             const std::vector<BoundingBox>& ground_truth, double iou_threshold);

/// Pooled single-class detection AP at one IoU threshold, 101-point
/// interpolated (detection-community convention).
double detection_ap(const std::vector<std::vector<ScoredBox>>& predictions_per_image,
                    const std::vector<std::vector<BoundingBox>>& ground_truth_per_image,
                    double iou_threshold);

/// Recall at one IoU threshold with detections truncated to the top-k
/// highest-confidence predictions per image.
double detection_recall(const std::vector<std::vector<ScoredBox>>& predictions_per_image,
                        const std::vector<std::vector<BoundingBox>>& ground_truth_per_image,
                        double iou_threshold, std::int64_t top_k);

struct LocalizationMetrics {
  double mean_iou = 0.0;  // per-GT best prediction IoU, unmatched contribute 0
  double map = 0.0;       // mean AP over IoU 0.50:0.05:0.95
  double map50 = 0.0;
  double map75 = 0.0;
  double mar1 = 0.0;   // recall at 1 prediction/image, averaged over thresholds
  double mar10 = 0.0;  // recall at 10 predictions/image, averaged over thresholds
};

/// IoU thresholds 0.50:0.05:0.95 used across the suite.
const std::vector<double>& coco_iou_thresholds();

LocalizationMetrics map_suite(const std::vector<std::vector<ScoredBox>>& predictions_per_image,
                              const std::vector<std::vector<BoundingBox>>& ground_truth_per_image);

}  // namespace shearo::eval
