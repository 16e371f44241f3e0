#include "shearo/eval/detection.hpp"

#include <algorithm>
#include <cmath>

#include "shearo/core/error.hpp"

namespace shearo::eval {

double iou(const BoundingBox& a, const BoundingBox& b) {
  a.validate("iou");
  b.validate("iou");
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

namespace {

std::vector<std::size_t> by_confidence(const std::vector<ScoredBox>& predictions) {
  std::vector<std::size_t> order(predictions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].confidence > predictions[b].confidence;
  });
  return order;
}

}  // namespace

MatchResult match_detections(const std::vector<ScoredBox>& predictions,
                             const std::vector<BoundingBox>& ground_truth, double iou_threshold) {
  if (!(iou_threshold > 0.0) || iou_threshold > 1.0)
    throw ValidationError("match_detections: iou threshold must lie in (0,1]");
  MatchResult result;
  result.true_positive.assign(predictions.size(), false);
  result.matched_gt.assign(predictions.size(), -1);
  std::vector<bool> taken(ground_truth.size(), false);

  for (const std::size_t pi : by_confidence(predictions)) {
    double best_iou = 0.0;
    std::int64_t best_gt = -1;
    for (std::size_t gi = 0; gi < ground_truth.size(); ++gi) {
      if (taken[gi]) continue;
      const double v = iou(predictions[pi].box, ground_truth[gi]);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best_gt = static_cast<std::int64_t>(gi);
      }
    }
    if (best_gt >= 0) {
      taken[static_cast<std::size_t>(best_gt)] = true;
      result.true_positive[pi] = true;
      result.matched_gt[pi] = best_gt;
    }
  }
  result.unmatched_ground_truth =
      static_cast<std::int64_t>(std::count(taken.begin(), taken.end(), false));
  return result;
}

namespace {

void require_aligned(const std::vector<std::vector<ScoredBox>>& preds,
                     const std::vector<std::vector<BoundingBox>>& gts) {
  if (preds.size() != gts.size())
    throw ValidationError("detection metrics: prediction/ground-truth image counts differ");
}

std::vector<ScoredBox> top_k(const std::vector<ScoredBox>& predictions, std::int64_t k) {
  if (k < 0 || static_cast<std::size_t>(k) >= predictions.size()) return predictions;
  std::vector<ScoredBox> out;
  for (const std::size_t i : by_confidence(predictions)) {
    out.push_back(predictions[i]);
    if (static_cast<std::int64_t>(out.size()) == k) break;
  }
  return out;
}

}  // namespace

double detection_ap(const std::vector<std::vector<ScoredBox>>& predictions_per_image,
                    const std::vector<std::vector<BoundingBox>>& ground_truth_per_image,
                    double iou_threshold) {
  require_aligned(predictions_per_image, ground_truth_per_image);
  std::int64_t total_gt = 0;
  struct Entry {
    double confidence;
    bool tp;
    std::size_t image, index;  // deterministic tie-break
  };
  std::vector<Entry> entries;
  for (std::size_t img = 0; img < predictions_per_image.size(); ++img) {
    total_gt += static_cast<std::int64_t>(ground_truth_per_image[img].size());
    const MatchResult match =
        match_detections(predictions_per_image[img], ground_truth_per_image[img], iou_threshold);
    for (std::size_t pi = 0; pi < predictions_per_image[img].size(); ++pi)
      entries.push_back(
          {predictions_per_image[img][pi].confidence, match.true_positive[pi], img, pi});
  }
  if (total_gt == 0) return 0.0;

  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });

  // Precision envelope sampled at 101 recall points.
  std::vector<double> precision_at;
  std::vector<double> recall_at;
  std::int64_t tp = 0, fp = 0;
  for (const Entry& e : entries) {
    (e.tp ? tp : fp) += 1;
    precision_at.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall_at.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
  }
  for (std::size_t i = precision_at.size(); i-- > 1;)
    precision_at[i - 1] = std::max(precision_at[i - 1], precision_at[i]);

  double ap = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double target = static_cast<double>(r) / 100.0;
    // First point with recall >= target.
    double p = 0.0;
    for (std::size_t i = 0; i < recall_at.size(); ++i) {
      if (recall_at[i] >= target - 1e-12) {
        p = precision_at[i];
        break;
      }
    }
    ap += p;
  }
  return ap / 101.0;
}

double detection_recall(const std::vector<std::vector<ScoredBox>>& predictions_per_image,
                        const std::vector<std::vector<BoundingBox>>& ground_truth_per_image,
                        double iou_threshold, std::int64_t k) {
  require_aligned(predictions_per_image, ground_truth_per_image);
  std::int64_t total_gt = 0, matched = 0;
  for (std::size_t img = 0; img < predictions_per_image.size(); ++img) {
    const auto& gts = ground_truth_per_image[img];
    total_gt += static_cast<std::int64_t>(gts.size());
    const MatchResult match =
        match_detections(top_k(predictions_per_image[img], k), gts, iou_threshold);
    matched += static_cast<std::int64_t>(gts.size()) - match.unmatched_ground_truth;
  }
  if (total_gt == 0) return 0.0;
  return static_cast<double>(matched) / static_cast<double>(total_gt);
}

const std::vector<double>& coco_iou_thresholds() {
  static const std::vector<double> thresholds = [] {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
    return t;
  }();
  return thresholds;
}

LocalizationMetrics map_suite(const std::vector<std::vector<ScoredBox>>& predictions_per_image,
                              const std::vector<std::vector<BoundingBox>>& ground_truth_per_image) {
  require_aligned(predictions_per_image, ground_truth_per_image);
  LocalizationMetrics m;

  double ap_sum = 0.0, r1_sum = 0.0, r10_sum = 0.0;
  for (const double t : coco_iou_thresholds()) {
    ap_sum += detection_ap(predictions_per_image, ground_truth_per_image, t);
    r1_sum += detection_recall(predictions_per_image, ground_truth_per_image, t, 1);
    r10_sum += detection_recall(predictions_per_image, ground_truth_per_image, t, 10);
  }
  const double n = static_cast<double>(coco_iou_thresholds().size());
  m.map = ap_sum / n;
  m.mar1 = r1_sum / n;
  m.mar10 = r10_sum / n;
  m.map50 = detection_ap(predictions_per_image, ground_truth_per_image, 0.50);
  m.map75 = detection_ap(predictions_per_image, ground_truth_per_image, 0.75);

  // Per-GT best-overlap IoU; ground truths with no prediction contribute 0.
  std::int64_t total_gt = 0;
  double iou_sum = 0.0;
  for (std::size_t img = 0; img < ground_truth_per_image.size(); ++img) {
    for (const auto& gt : ground_truth_per_image[img]) {
      ++total_gt;
      double best = 0.0;
      for (const auto& pred : predictions_per_image[img]) best = std::max(best, iou(pred.box, gt));
      iou_sum += best;
    }
  }
  m.mean_iou = total_gt > 0 ? iou_sum / static_cast<double>(total_gt) : 0.0;
  return m;
}

}  // namespace shearo::eval
