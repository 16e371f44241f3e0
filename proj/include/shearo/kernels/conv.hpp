#pragma once

#include <cstdint>

namespace shearo::kernels {

struct ConvGeometry {
  std::int64_t in_channels = 0;
  std::int64_t in_h = 0;
  std::int64_t in_w = 0;
  std::int64_t kernel_h = 0;
  std::int64_t kernel_w = 0;
  std::int64_t stride = 1;
  std::int64_t pad = 0;

  std::int64_t out_h() const { return (in_h + 2 * pad - kernel_h) / stride + 1; }
  std::int64_t out_w() const { return (in_w + 2 * pad - kernel_w) / stride + 1; }
  std::int64_t patch_len() const { return in_channels * kernel_h * kernel_w; }
};

/// Unfolds one (C,H,W) image into a (C*kh*kw) x (out_h*out_w) matrix.
/// Zero padding.
void im2col(const ConvGeometry& g, const double* image, double* cols);

/// Scatter-add inverse of im2col: folds columns back into a (C,H,W) image.
/// The image buffer must be zeroed by the caller.
void col2im(const ConvGeometry& g, const double* cols, double* image);

namespace ref {
/// Naive direct convolution of one image: out (C_out, out_h, out_w),
/// weight (C_out, C_in, kh, kw). Serial, for kernel tests.
void conv2d_direct(const ConvGeometry& g, std::int64_t out_channels, const double* image,
                   const double* weight, const double* bias, double* out);
void im2col(const ConvGeometry& g, const double* image, double* cols);
}  // namespace ref

}  // namespace shearo::kernels
