#pragma once

#include <cstdint>
#include <vector>

#include "shearo/nn/backbone.hpp"

namespace shearo::models {

/// Student-teacher feature pyramid matching: a frozen pretrained teacher, a
/// trainable student of identical topology, anomaly = feature discrepancy.
struct StfpmConfig {
  nn::BackboneConfig backbone;             // shared teacher/student topology
  std::int64_t input_width = 256;          // aspect-padded model grid
  std::int64_t input_height = 256;
  enum class Combine { product, sum } combine = Combine::product;
  double norm_mean = 0.5;  // teacher preprocessing convention on [0,1] phase
  double norm_std = 0.25;

  void validate() const;
  bool operator==(const StfpmConfig&) const = default;
};

/// Per-position channel-normalized feature distance, 0.5 * ||t^ - s^||^2.
/// Values lie in [0, 2]; zero-norm vectors are regularized by eps 1e-8.
Tensor stfpm_layer_distance(const Tensor& teacher_feats, const Tensor& student_feats);

/// Sum over layers of the spatial mean of each distance map.
double stfpm_loss(const std::vector<Tensor>& distance_maps);

class Stfpm {
 public:
  Stfpm(const StfpmConfig& config, std::uint64_t seed);

  const StfpmConfig& config() const { return config_; }
  nn::Backbone& teacher() { return teacher_; }
  nn::Backbone& student() { return student_; }

  /// Frozen-teacher pyramid in eval mode.
  std::vector<Tensor> teacher_features(const Tensor& x) { return teacher_.forward(x, false); }

  /// Training step core: student forward in train mode, loss against the
  /// given teacher pyramid, gradients accumulated into student params.
  double loss_and_backward(const Tensor& x, const std::vector<Tensor>& teacher_taps);

  /// Eval-mode loss, no gradients.
  double loss_eval(const Tensor& x, const std::vector<Tensor>& teacher_taps);

  /// Anomaly heatmap of one preprocessed image (3, H, W): per-layer distance
  /// maps bilinearly upsampled to (H, W) and combined per config.
  Tensor anomaly_map(const Tensor& chw);

 private:
  std::vector<Tensor> distance_grads(const std::vector<Tensor>& teacher_taps,
                                     const std::vector<Tensor>& student_taps,
                                     std::vector<Tensor>* maps_out);

  StfpmConfig config_;
  nn::Backbone teacher_;
  nn::Backbone student_;
};

}  // namespace shearo::models
