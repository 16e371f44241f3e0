#pragma once

#include <cstdint>
#include <vector>

#include "shearo/core/tensor.hpp"
#include "shearo/datamodel/datamodel.hpp"

namespace shearo::models {
class TrainedModel;
}

namespace shearo::scoring {

using datamodel::BoundingBox;

/// A localized anomaly region with the heatmap maximum inside it as the
/// confidence proxy. Shares the external-prediction type so detections
/// serialize in the same JSON schema.
using Detection = datamodel::Prediction;

/// Sample-level score: the heatmap maximum.
double score_peaks(const Tensor& heatmap);

/// Sample-level score: the heatmap mean.
double score_means(const Tensor& heatmap);

/// Gaussian smoothing with reflective borders (mass-preserving kernel).
Tensor smooth(const Tensor& heatmap, double sigma);

/// mask = value >= threshold, as a {0,1} tensor on the same grid.
Tensor binarize(const Tensor& heatmap, double threshold);

/// 8-connected components of the mask with pixel count >= min_area become
/// detections: tight inclusive pixel-index boxes, confidence = max heatmap
/// value inside the component, sorted by confidence descending. Components
/// whose tight box is a single row or column are dropped (zero-area box).
std::vector<Detection> extract_regions(const Tensor& mask, const Tensor& heatmap,
                                       std::int64_t min_area);

/// smooth -> binarize -> extract_regions in one call.
struct LocalizeParams {
  double sigma = 4.0;
  double threshold = 0.1;
  std::int64_t min_area = 4;
};
std::vector<Detection> localize(const Tensor& heatmap, const LocalizeParams& params);

enum class Strategy { peaks, means, recon };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// One scalar per sample: reconstruction error for the autoencoders,
/// peaks/means of one heatmap inference for the student-teacher model.
/// Incompatible (model, strategy) pairs are rejected.
double sample_score(models::TrainedModel& model, const Tensor& phase_hw, Strategy strategy);

/// Validation-driven threshold search: picks the candidate that maximizes
/// detection average precision at IoU 0.5 against the ground truth. Used
/// when the fixed per-subset defaults are not appropriate for a run.
struct ThresholdSearchResult {
  double threshold = 0.0;
  double score = 0.0;  // AP@50 achieved on the validation data
};
ThresholdSearchResult tune_threshold(const std::vector<Tensor>& heatmaps,
                                     const std::vector<std::vector<BoundingBox>>& ground_truth,
                                     double sigma, std::int64_t min_area,
                                     std::int64_t grid_size = 64);

}  // namespace shearo::scoring
