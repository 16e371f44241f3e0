#pragma once

#include "shearo/core/tensor.hpp"

namespace shearo::models {

/// Autoencoder input grid (width x height), from the reference resolution
/// 1920x1050 divided down to 96x50.
inline constexpr std::int64_t kAeWidth = 96;
inline constexpr std::int64_t kAeHeight = 50;

/// Wrapped phase [-pi, pi) mapped linearly to [0, 1].
double phase_to_unit(double phase);

/// Bilinear resize to 96x50 and [0,1] scaling, flattened to length 4800.
Tensor preprocess_ae(const Tensor& phase_hw);

/// Same resampling, kept as a (1, 50, 96) image.
Tensor preprocess_convae(const Tensor& phase_hw);

/// Aspect-preserving placement of the original grid inside the model grid:
/// original (x, y) maps to (x * scale + pad_x, y * scale + pad_y).
struct AspectTransform {
  double scale = 1.0;
  double pad_x = 0.0;
  double pad_y = 0.0;
};

/// Aspect-padded resize to (out_h, out_w), single channel replicated to
/// three, then (v - mean) / std normalization of the [0,1]-scaled phase.
/// Padding holds the normalized value of phase zero.
Tensor preprocess_stfpm(const Tensor& phase_hw, std::int64_t out_h, std::int64_t out_w,
                        double norm_mean, double norm_std,
                        AspectTransform* transform = nullptr);

AspectTransform stfpm_transform(std::int64_t orig_h, std::int64_t orig_w, std::int64_t out_h,
                                std::int64_t out_w);

/// Mean squared difference between two equally shaped arrays.
double reconstruction_error(const Tensor& x, const Tensor& reconstruction);

}  // namespace shearo::models
