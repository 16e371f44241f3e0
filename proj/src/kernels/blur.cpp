#include "shearo/kernels/blur.hpp"

#include <cmath>
#include <vector>

namespace shearo::kernels {

namespace {

std::vector<double> gaussian_taps(double sigma) {
  const std::int64_t radius = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(3.0 * sigma)));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::int64_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// Symmetric reflection: indices -1,-2,... map to 0,1,...; n,n+1 map to n-1,n-2.
inline std::int64_t reflect(std::int64_t i, std::int64_t n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

template <bool Parallel>
Tensor blur_impl(const Tensor& src, double sigma) {
  if (src.ndim() != 2) throw ValidationError("gaussian_blur expects a (H,W) tensor");
  if (!(sigma > 0.0)) throw ValidationError("gaussian_blur requires sigma > 0");
  const std::int64_t h = src.dim(0), w = src.dim(1);
  const std::vector<double> taps = gaussian_taps(sigma);
  const std::int64_t radius = static_cast<std::int64_t>(taps.size() / 2);

  Tensor tmp({h, w});
#pragma omp parallel for schedule(static) if (Parallel)
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::int64_t t = -radius; t <= radius; ++t)
        acc += taps[static_cast<std::size_t>(t + radius)] * src.at2(y, reflect(x + t, w));
      tmp.at2(y, x) = acc;
    }
  }
  Tensor out({h, w});
#pragma omp parallel for schedule(static) if (Parallel)
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::int64_t t = -radius; t <= radius; ++t)
        acc += taps[static_cast<std::size_t>(t + radius)] * tmp.at2(reflect(y + t, h), x);
      out.at2(y, x) = acc;
    }
  }
  return out;
}

}  // namespace

Tensor gaussian_blur(const Tensor& src, double sigma) { return blur_impl<true>(src, sigma); }

namespace ref {
Tensor gaussian_blur(const Tensor& src, double sigma) { return blur_impl<false>(src, sigma); }
}  // namespace ref

}  // namespace shearo::kernels
