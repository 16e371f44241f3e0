#include "shearo/models/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shearo/core/error.hpp"
#include "shearo/kernels/resize.hpp"

namespace shearo::models {

namespace {
constexpr double kPi = std::numbers::pi;
}

double phase_to_unit(double phase) { return (phase + kPi) / (2.0 * kPi); }

Tensor preprocess_ae(const Tensor& phase_hw) {
  Tensor flat = preprocess_convae(phase_hw);
  return flat.reshaped({kAeWidth * kAeHeight});
}

Tensor preprocess_convae(const Tensor& phase_hw) {
  if (phase_hw.ndim() != 2 || phase_hw.numel() == 0)
    throw ValidationError("preprocess expects a non-empty (H,W) phase image");
  Tensor resized = kernels::bilinear_resize(phase_hw, kAeHeight, kAeWidth);
  for (std::int64_t i = 0; i < resized.numel(); ++i) resized[i] = phase_to_unit(resized[i]);
  return resized.reshaped({1, kAeHeight, kAeWidth});
}

AspectTransform stfpm_transform(std::int64_t orig_h, std::int64_t orig_w, std::int64_t out_h,
                                std::int64_t out_w) {
  const double scale = std::min(static_cast<double>(out_w) / static_cast<double>(orig_w),
                                static_cast<double>(out_h) / static_cast<double>(orig_h));
  const auto fit_w = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(scale * static_cast<double>(orig_w))));
  const auto fit_h = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(scale * static_cast<double>(orig_h))));
  AspectTransform t;
  t.scale = scale;
  t.pad_x = static_cast<double>((out_w - fit_w) / 2);
  t.pad_y = static_cast<double>((out_h - fit_h) / 2);
  return t;
}

Tensor preprocess_stfpm(const Tensor& phase_hw, std::int64_t out_h, std::int64_t out_w,
                        double norm_mean, double norm_std, AspectTransform* transform) {
  if (phase_hw.ndim() != 2 || phase_hw.numel() == 0)
    throw ValidationError("preprocess expects a non-empty (H,W) phase image");
  if (!(norm_std > 0.0)) throw ValidationError("normalization std must be positive");

  const AspectTransform t = stfpm_transform(phase_hw.dim(0), phase_hw.dim(1), out_h, out_w);
  if (transform) *transform = t;
  const auto fit_w = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::llround(t.scale * static_cast<double>(phase_hw.dim(1)))));
  const auto fit_h = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::llround(t.scale * static_cast<double>(phase_hw.dim(0)))));
  const Tensor resized = kernels::bilinear_resize(phase_hw, fit_h, fit_w);

  const double pad_value = (phase_to_unit(0.0) - norm_mean) / norm_std;
  Tensor out({3, out_h, out_w}, pad_value);
  const auto px = static_cast<std::int64_t>(t.pad_x);
  const auto py = static_cast<std::int64_t>(t.pad_y);
  for (std::int64_t y = 0; y < fit_h; ++y) {
    for (std::int64_t x = 0; x < fit_w; ++x) {
      const double v = (phase_to_unit(resized.at2(y, x)) - norm_mean) / norm_std;
      for (std::int64_t c = 0; c < 3; ++c) out.at3(c, py + y, px + x) = v;
    }
  }
  return out;
}

double reconstruction_error(const Tensor& x, const Tensor& reconstruction) {
  if (!x.same_shape(reconstruction))
    throw ValidationError("reconstruction_error: shape mismatch " + x.shape_str() + " vs " +
                          reconstruction.shape_str());
  double acc = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double d = x[i] - reconstruction[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.numel());
}

}  // namespace shearo::models
