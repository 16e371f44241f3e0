#include "shearo/kernels/resize.hpp"

#include <algorithm>
#include <cmath>

namespace shearo::kernels {

namespace {

inline void resize_row(const Tensor& src, Tensor& dst, std::int64_t oy, double sy, double sx) {
  const std::int64_t in_h = src.dim(0), in_w = src.dim(1);
  const std::int64_t out_w = dst.dim(1);
  double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
  fy = std::clamp(fy, 0.0, static_cast<double>(in_h - 1));
  const std::int64_t y0 = static_cast<std::int64_t>(fy);
  const std::int64_t y1 = std::min(y0 + 1, in_h - 1);
  const double wy = fy - static_cast<double>(y0);
  for (std::int64_t ox = 0; ox < out_w; ++ox) {
    double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
    fx = std::clamp(fx, 0.0, static_cast<double>(in_w - 1));
    const std::int64_t x0 = static_cast<std::int64_t>(fx);
    const std::int64_t x1 = std::min(x0 + 1, in_w - 1);
    const double wx = fx - static_cast<double>(x0);
    const double top = src.at2(y0, x0) * (1.0 - wx) + src.at2(y0, x1) * wx;
    const double bot = src.at2(y1, x0) * (1.0 - wx) + src.at2(y1, x1) * wx;
    dst.at2(oy, ox) = top * (1.0 - wy) + bot * wy;
  }
}

}  // namespace

Tensor bilinear_resize(const Tensor& src, std::int64_t out_h, std::int64_t out_w) {
  if (src.ndim() != 2 || src.dim(0) < 1 || src.dim(1) < 1)
    throw ValidationError("bilinear_resize expects a non-empty (H,W) tensor");
  if (out_h < 1 || out_w < 1) throw ValidationError("bilinear_resize target must be positive");
  Tensor dst({out_h, out_w});
  const double sy = static_cast<double>(src.dim(0)) / static_cast<double>(out_h);
  const double sx = static_cast<double>(src.dim(1)) / static_cast<double>(out_w);
#pragma omp parallel for schedule(static)
  for (std::int64_t oy = 0; oy < out_h; ++oy) resize_row(src, dst, oy, sy, sx);
  return dst;
}

namespace ref {

Tensor bilinear_resize(const Tensor& src, std::int64_t out_h, std::int64_t out_w) {
  Tensor dst({out_h, out_w});
  const double sy = static_cast<double>(src.dim(0)) / static_cast<double>(out_h);
  const double sx = static_cast<double>(src.dim(1)) / static_cast<double>(out_w);
  for (std::int64_t oy = 0; oy < out_h; ++oy) resize_row(src, dst, oy, sy, sx);
  return dst;
}

}  // namespace ref

}  // namespace shearo::kernels
