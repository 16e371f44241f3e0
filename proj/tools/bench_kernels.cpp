// Timing comparison of the OpenMP kernels against their serial references.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "shearo/core/parallel.hpp"
#include "shearo/core/rng.hpp"
#include "shearo/core/tensor.hpp"
#include "shearo/kernels/blur.hpp"
#include "shearo/kernels/conv.hpp"
#include "shearo/kernels/gemm.hpp"
#include "shearo/kernels/resize.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void report(const std::string& name, double serial_s, double parallel_s, double work,
            const char* unit) {
  std::printf("%-28s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx   %8.2f %s\n",
              name.c_str(), serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
              work / parallel_s / 1e9, unit);
}

}  // namespace

int main() {
  shearo::init_threads();
  std::printf("worker threads: %d\n\n", shearo::max_threads());
  shearo::Rng rng(7);

  {
    const std::int64_t m = 256, n = 2048, k = 864;
    std::vector<double> a(m * k), b(k * n), c(m * n), c_ref(m * n);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    const double flops = 2.0 * m * n * k;
    const double ts = time_of([&] { shearo::kernels::ref::gemm_nn(m, n, k, a.data(), b.data(), c_ref.data()); }, 2);
    const double tp = time_of([&] { shearo::kernels::gemm_nn(m, n, k, a.data(), b.data(), c.data()); }, 2);
    report("gemm_nn 256x2048x864", ts, tp, flops, "GFLOP/s");
  }

  {
    shearo::kernels::ConvGeometry g{96, 50, 96, 3, 3, 2, 1};
    shearo::Tensor img({g.in_channels, g.in_h, g.in_w});
    for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform(-1, 1);
    std::vector<double> cols(g.patch_len() * g.out_h() * g.out_w());
    const double bytes = static_cast<double>(cols.size()) * sizeof(double);
    const double ts = time_of([&] { shearo::kernels::ref::im2col(g, img.data(), cols.data()); }, 20);
    const double tp = time_of([&] { shearo::kernels::im2col(g, img.data(), cols.data()); }, 20);
    report("im2col 96x50x96 k3s2", ts, tp, bytes, "GB/s");
  }

  {
    shearo::Tensor h({512, 512});
    for (std::int64_t i = 0; i < h.numel(); ++i) h[i] = rng.uniform(0, 1);
    const double work = static_cast<double>(h.numel());
    const double ts = time_of([&] { (void)shearo::kernels::ref::gaussian_blur(h, 4.0); }, 3);
    const double tp = time_of([&] { (void)shearo::kernels::gaussian_blur(h, 4.0); }, 3);
    report("gaussian_blur 512^2 s4", ts, tp, work, "Gpx/s");
  }

  {
    shearo::Tensor src({1050, 1920});
    for (std::int64_t i = 0; i < src.numel(); ++i) src[i] = rng.uniform(-1, 1);
    const double work = 96.0 * 50.0;
    const double ts = time_of([&] { (void)shearo::kernels::ref::bilinear_resize(src, 50, 96); }, 10);
    const double tp = time_of([&] { (void)shearo::kernels::bilinear_resize(src, 50, 96); }, 10);
    report("resize 1920x1050->96x50", ts, tp, work, "Gpx/s");
  }

  return 0;
}
