#include "shearo/kernels/conv.hpp"

#include <cstring>

namespace shearo::kernels {

void im2col(const ConvGeometry& g, const double* image, double* cols) {
  const std::int64_t oh = g.out_h(), ow = g.out_w();
  const std::int64_t spatial = oh * ow;
#pragma omp parallel for schedule(static)
  for (std::int64_t row = 0; row < g.patch_len(); ++row) {
    const std::int64_t kw_i = row % g.kernel_w;
    const std::int64_t kh_i = (row / g.kernel_w) % g.kernel_h;
    const std::int64_t c = row / (g.kernel_w * g.kernel_h);
    const double* src = image + c * g.in_h * g.in_w;
    double* dst = cols + row * spatial;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      const std::int64_t iy = oy * g.stride - g.pad + kh_i;
      if (iy < 0 || iy >= g.in_h) {
        std::memset(dst + oy * ow, 0, static_cast<std::size_t>(ow) * sizeof(double));
        continue;
      }
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        const std::int64_t ix = ox * g.stride - g.pad + kw_i;
        dst[oy * ow + ox] = (ix >= 0 && ix < g.in_w) ? src[iy * g.in_w + ix] : 0.0;
      }
    }
  }
}

void col2im(const ConvGeometry& g, const double* cols, double* image) {
  const std::int64_t oh = g.out_h(), ow = g.out_w();
  const std::int64_t spatial = oh * ow;
  // Parallel over channels: every target pixel belongs to one channel, so
  // scatter-adds from different threads never collide.
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < g.in_channels; ++c) {
    double* dst = image + c * g.in_h * g.in_w;
    for (std::int64_t kh_i = 0; kh_i < g.kernel_h; ++kh_i) {
      for (std::int64_t kw_i = 0; kw_i < g.kernel_w; ++kw_i) {
        const std::int64_t row = (c * g.kernel_h + kh_i) * g.kernel_w + kw_i;
        const double* src = cols + row * spatial;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + kh_i;
          if (iy < 0 || iy >= g.in_h) continue;
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kw_i;
            if (ix >= 0 && ix < g.in_w) dst[iy * g.in_w + ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

namespace ref {

void conv2d_direct(const ConvGeometry& g, std::int64_t out_channels, const double* image,
                   const double* weight, const double* bias, double* out) {
  const std::int64_t oh = g.out_h(), ow = g.out_w();
  for (std::int64_t oc = 0; oc < out_channels; ++oc) {
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        double acc = bias ? bias[oc] : 0.0;
        for (std::int64_t c = 0; c < g.in_channels; ++c) {
          for (std::int64_t ky = 0; ky < g.kernel_h; ++ky) {
            const std::int64_t iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (std::int64_t kx = 0; kx < g.kernel_w; ++kx) {
              const std::int64_t ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              acc += image[(c * g.in_h + iy) * g.in_w + ix] *
                     weight[((oc * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx];
            }
          }
        }
        out[(oc * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

void im2col(const ConvGeometry& g, const double* image, double* cols) {
  const std::int64_t oh = g.out_h(), ow = g.out_w();
  const std::int64_t spatial = oh * ow;
  for (std::int64_t row = 0; row < g.patch_len(); ++row) {
    const std::int64_t kw_i = row % g.kernel_w;
    const std::int64_t kh_i = (row / g.kernel_w) % g.kernel_h;
    const std::int64_t c = row / (g.kernel_w * g.kernel_h);
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        const std::int64_t iy = oy * g.stride - g.pad + kh_i;
        const std::int64_t ix = ox * g.stride - g.pad + kw_i;
        cols[row * spatial + oy * ow + ox] = (iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w)
                                                 ? image[(c * g.in_h + iy) * g.in_w + ix]
                                                 : 0.0;
      }
    }
  }
}

}  // namespace ref

}  // namespace shearo::kernels
