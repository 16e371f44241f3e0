#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "shearo/core/rng.hpp"
#include "shearo/core/tensor.hpp"
#include "shearo/kernels/blur.hpp"
#include "shearo/kernels/conv.hpp"
#include "shearo/kernels/gemm.hpp"
#include "shearo/kernels/resize.hpp"

using namespace shearo;
namespace k = shearo::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  CHECK(worst < tol);
}

}  // namespace

TEST_CASE("gemm variants match the serial reference") {
  Rng rng(11);
  for (const auto [m, n, kk] : {std::array<std::int64_t, 3>{5, 7, 9},
                                std::array<std::int64_t, 3>{64, 64, 64},
                                std::array<std::int64_t, 3>{97, 130, 77},
                                std::array<std::int64_t, 3>{128, 520, 864}}) {
    const auto a = random_vec(static_cast<std::size_t>(m * kk), rng);
    const auto b = random_vec(static_cast<std::size_t>(kk * n), rng);
    std::vector<double> c(static_cast<std::size_t>(m * n)), c_ref = c;

    k::gemm_nn(m, n, kk, a.data(), b.data(), c.data());
    k::ref::gemm_nn(m, n, kk, a.data(), b.data(), c_ref.data());
    check_close(c, c_ref, 1e-12);

    const auto bt = random_vec(static_cast<std::size_t>(n * kk), rng);
    k::gemm_nt(m, n, kk, a.data(), bt.data(), c.data());
    k::ref::gemm_nt(m, n, kk, a.data(), bt.data(), c_ref.data());
    check_close(c, c_ref, 1e-12);

    const auto at = random_vec(static_cast<std::size_t>(kk * m), rng);
    k::gemm_tn(m, n, kk, at.data(), b.data(), c.data());
    k::ref::gemm_tn(m, n, kk, at.data(), b.data(), c_ref.data());
    check_close(c, c_ref, 1e-12);
  }
}

TEST_CASE("gemm beta accumulates") {
  Rng rng(3);
  const std::int64_t m = 9, n = 13, kk = 5;
  const auto a = random_vec(static_cast<std::size_t>(m * kk), rng);
  const auto b = random_vec(static_cast<std::size_t>(kk * n), rng);
  auto c = random_vec(static_cast<std::size_t>(m * n), rng);
  auto c_ref = c;
  k::gemm_nn(m, n, kk, a.data(), b.data(), c.data(), 1.0);
  k::ref::gemm_nn(m, n, kk, a.data(), b.data(), c_ref.data(), 1.0);
  check_close(c, c_ref, 1e-12);
}

TEST_CASE("im2col parallel matches reference and inverts through col2im") {
  Rng rng(5);
  const k::ConvGeometry g{3, 11, 14, 3, 3, 2, 1};
  Tensor img({g.in_channels, g.in_h, g.in_w});
  for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform(-1, 1);

  std::vector<double> cols(static_cast<std::size_t>(g.patch_len() * g.out_h() * g.out_w()));
  std::vector<double> cols_ref = cols;
  k::im2col(g, img.data(), cols.data());
  k::ref::im2col(g, img.data(), cols_ref.data());
  CHECK(cols == cols_ref);

  // col2im(im2col(x)) multiplies each pixel by its patch multiplicity;
  // verify against a direct count.
  Tensor folded({g.in_channels, g.in_h, g.in_w});
  k::col2im(g, cols.data(), folded.data());
  Tensor ones = img;
  ones.fill(1.0);
  std::vector<double> ones_cols(cols.size());
  k::ref::im2col(g, ones.data(), ones_cols.data());
  Tensor mult({g.in_channels, g.in_h, g.in_w});
  k::col2im(g, ones_cols.data(), mult.data());
  for (std::int64_t i = 0; i < img.numel(); ++i)
    CHECK(folded[i] == doctest::Approx(img[i] * mult[i]).epsilon(1e-12));
}

TEST_CASE("conv via im2col+gemm equals direct reference convolution") {
  Rng rng(17);
  const k::ConvGeometry g{4, 9, 10, 3, 3, 2, 1};
  const std::int64_t c_out = 6;
  Tensor img({g.in_channels, g.in_h, g.in_w});
  for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform(-1, 1);
  const auto weight = random_vec(static_cast<std::size_t>(c_out * g.patch_len()), rng);
  const auto bias = random_vec(static_cast<std::size_t>(c_out), rng);

  const std::int64_t spatial = g.out_h() * g.out_w();
  std::vector<double> cols(static_cast<std::size_t>(g.patch_len() * spatial));
  k::im2col(g, img.data(), cols.data());
  std::vector<double> out(static_cast<std::size_t>(c_out * spatial));
  k::gemm_nn(c_out, spatial, g.patch_len(), weight.data(), cols.data(), out.data());
  for (std::int64_t oc = 0; oc < c_out; ++oc)
    for (std::int64_t p = 0; p < spatial; ++p) out[static_cast<std::size_t>(oc * spatial + p)] += bias[static_cast<std::size_t>(oc)];

  std::vector<double> direct(out.size());
  k::ref::conv2d_direct(g, c_out, img.data(), weight.data(), bias.data(), direct.data());
  check_close(out, direct, 1e-12);
}

TEST_CASE("gaussian blur matches reference and preserves mass") {
  Rng rng(23);
  Tensor h({40, 56});
  for (std::int64_t i = 0; i < h.numel(); ++i) h[i] = rng.uniform(0, 1);
  const Tensor a = k::gaussian_blur(h, 2.5);
  const Tensor b = k::ref::gaussian_blur(h, 2.5);
  for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);

  // Interior-supported impulse: total mass within 0.1%.
  Tensor impulse({41, 41});
  impulse.at2(20, 20) = 1.0;
  const Tensor blurred = k::gaussian_blur(impulse, 1.0);
  double sum = 0.0;
  for (std::int64_t i = 0; i < blurred.numel(); ++i) sum += blurred[i];
  CHECK(std::abs(sum - 1.0) < 1e-3);
  // Discrete normalized kernel: center of a sigma=1 impulse response.
  CHECK(blurred.at2(20, 20) == doctest::Approx(0.159).epsilon(0.01));
}

TEST_CASE("bilinear resize identity and reference equality") {
  Rng rng(31);
  Tensor src({25, 37});
  for (std::int64_t i = 0; i < src.numel(); ++i) src[i] = rng.uniform(-3, 3);

  const Tensor same = k::bilinear_resize(src, 25, 37);
  for (std::int64_t i = 0; i < src.numel(); ++i) CHECK(same[i] == src[i]);

  const Tensor up = k::bilinear_resize(src, 50, 96);
  const Tensor up_ref = k::ref::bilinear_resize(src, 50, 96);
  for (std::int64_t i = 0; i < up.numel(); ++i) CHECK(up[i] == up_ref[i]);

  // Constant field stays constant under any resize.
  Tensor flat({10, 10});
  flat.fill(0.75);
  const Tensor out = k::bilinear_resize(flat, 23, 17);
  for (std::int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == doctest::Approx(0.75).epsilon(1e-12));
}
