#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "shearo/core/rng.hpp"
#include "shearo/core/sha256.hpp"
#include "shearo/synthgen/synthgen.hpp"

using namespace shearo;
using namespace shearo::synthgen;

namespace {

constexpr double kPi = std::numbers::pi;

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("shearo_test_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

SpecimenSpec small_spec() {
  SpecimenSpec s;
  s.width_px = 64;
  s.height_px = 48;
  return s;
}

// Empirical Kolmogorov-Smirnov distance against the uniform CDF on [-pi, pi).
double ks_against_uniform(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double cdf = (values[i] + kPi) / (2.0 * kPi);
    worst = std::max(worst, std::abs(static_cast<double>(i + 1) / n - cdf));
    worst = std::max(worst, std::abs(cdf - static_cast<double>(i) / n));
  }
  return worst;
}

}  // namespace

TEST_CASE("displacement field identity cases") {
  const SpecimenSpec spec = small_spec();
  GlobalDeformationSpec none;

  const Tensor zero = displacement_field(spec, {}, none);
  for (std::int64_t i = 0; i < zero.numel(); ++i) CHECK(zero[i] == 0.0);

  DefectSpec d;
  d.center_x = 30.0;
  d.center_y = 25.0;
  d.radius_px = 6.0;
  d.bump_height = 0.8;
  const Tensor bumped = displacement_field(spec, {d}, none);
  CHECK(bumped.at2(25, 30) == doctest::Approx(0.8).epsilon(1e-12));

  d.profile = DefectProfile::plateau;
  const Tensor plateau = displacement_field(spec, {d}, none);
  CHECK(plateau.at2(25, 30) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("displacement field evaluates the polynomial basis directly") {
  const SpecimenSpec spec = small_spec();
  GlobalDeformationSpec g;
  g.enabled = true;
  g.mode_coefficients = {0.0, 0.5, 0.0, 0.0, 0.0, 0.0};  // w = 0.5 * x
  const Tensor w = displacement_field(spec, {}, g);
  CHECK(w.at2(7, 10) == doctest::Approx(5.0).epsilon(1e-12));

  // Oracle: direct evaluation of the full basis at probe points.
  GlobalDeformationSpec full;
  full.enabled = true;
  full.mode_coefficients = {0.3, -0.02, 0.01, 0.001, -0.0005, 0.0002};
  const Tensor wf = displacement_field(spec, {}, full);
  for (const auto [x, y] : {std::pair<int, int>{0, 0}, {10, 3}, {63, 47}}) {
    const double expect = 0.3 - 0.02 * x + 0.01 * y + 0.001 * x * x - 0.0005 * x * y + 0.0002 * y * y;
    CHECK(wf.at2(y, x) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("defect outside the image is rejected") {
  const SpecimenSpec spec = small_spec();
  DefectSpec d;
  d.center_x = 2.0;  // support spills over the left border
  d.center_y = 24.0;
  d.radius_px = 6.0;
  CHECK_THROWS_AS((void)displacement_field(spec, {d}, {}), ValidationError);
  CHECK_THROWS_AS((void)displacement_field(spec, {d, d, d}, {}), ValidationError);
}

TEST_CASE("shear phase of a constant field is zero") {
  Tensor w({20, 30});
  w.fill(3.7);
  ShearConfig cfg;
  cfg.shear_dx = 2;
  cfg.shear_dy = 1;
  const Tensor phi = shear_phase(w, cfg);
  for (std::int64_t i = 0; i < phi.numel(); ++i) CHECK(phi[i] == 0.0);
}

TEST_CASE("shear phase of a unit ramp is the closed-form constant") {
  Tensor w({16, 40});
  for (std::int64_t y = 0; y < 16; ++y)
    for (std::int64_t x = 0; x < 40; ++x) w.at2(y, x) = static_cast<double>(x);
  ShearConfig cfg;
  cfg.shear_dx = 3;
  cfg.shear_dy = 0;
  cfg.sensitivity = 2.0;
  const Tensor phi = shear_phase(w, cfg);
  for (std::int64_t y = 0; y < 16; ++y)
    for (std::int64_t x = 0; x < 40 - 3; ++x)  // away from the clamped border
      CHECK(phi.at2(y, x) == doctest::Approx(6.0).epsilon(1e-12));
  // Clamped border: w(x+dx) saturates at the last column.
  CHECK(phi.at2(0, 39) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("shear phase of a gaussian bump matches a finite-difference oracle") {
  const SpecimenSpec spec = small_spec();
  DefectSpec d;
  d.center_x = 32.0;
  d.center_y = 24.0;
  d.radius_px = 8.0;
  d.bump_height = 1.0;
  const Tensor w = displacement_field(spec, {d}, {});
  ShearConfig cfg;
  cfg.shear_dx = 2;
  cfg.shear_dy = 0;
  cfg.sensitivity = 1.0;
  const Tensor phi = shear_phase(w, cfg);

  // Oracle: the sampled difference of the analytic profile.
  for (const auto [x, y] : {std::pair<int, int>{20, 24}, {32, 24}, {40, 20}}) {
    const double expect = d.bump_at(x + 2, y) - d.bump_at(x, y);
    CHECK(phi.at2(y, x) == doctest::Approx(expect).epsilon(1e-12));
  }
  // Positive lobe left of center, negative right (bump decreasing ahead),
  // and a zero crossing at the extremum along the shear axis.
  CHECK(phi.at2(24, 24) > 0.0);
  CHECK(phi.at2(24, 38) < 0.0);
  CHECK(std::abs(phi.at2(24, 31)) < std::abs(phi.at2(24, 26)));
}

TEST_CASE("shear linearity away from clamped borders") {
  Rng rng(99);
  Tensor w1({12, 20}), w2({12, 20});
  for (std::int64_t i = 0; i < w1.numel(); ++i) {
    w1[i] = rng.uniform(-1, 1);
    w2[i] = rng.uniform(-1, 1);
  }
  ShearConfig cfg;
  cfg.shear_dx = 1;
  cfg.shear_dy = 1;
  cfg.sensitivity = 3.0;
  const double a = 0.7, b = -1.3;
  Tensor combo({12, 20});
  for (std::int64_t i = 0; i < combo.numel(); ++i) combo[i] = a * w1[i] + b * w2[i];
  const Tensor p1 = shear_phase(w1, cfg), p2 = shear_phase(w2, cfg), pc = shear_phase(combo, cfg);
  for (std::int64_t y = 0; y < 11; ++y)
    for (std::int64_t x = 0; x < 19; ++x)
      CHECK(pc.at2(y, x) == doctest::Approx(a * p1.at2(y, x) + b * p2.at2(y, x)).epsilon(1e-10));
}

TEST_CASE("wrap phase boundary and modular cases") {
  CHECK(wrap_scalar(0.0) == 0.0);
  CHECK(wrap_scalar(kPi) == doctest::Approx(-kPi));
  CHECK(wrap_scalar(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0));
  CHECK(wrap_scalar(-kPi) == doctest::Approx(-kPi));

  // Closure and idempotence on a wide sweep.
  Rng rng(4);
  Tensor t({1, 257});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-50.0, 50.0);
  const Tensor once = wrap_phase(t);
  const Tensor twice = wrap_phase(once);
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    CHECK(once[i] >= -kPi);
    CHECK(once[i] < kPi);
    CHECK(once[i] == twice[i]);
    // Same angle modulo 2*pi.
    CHECK(std::remainder(once[i] - t[i], 2.0 * kPi) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("noise: no-op, determinism, and full decorrelation uniformity") {
  const SpecimenSpec spec{192, 105, 500.0, 50.0};
  Tensor img({spec.height_px, spec.width_px});
  for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = wrap_scalar(0.01 * static_cast<double>(i));

  NoiseSpec silent{0.0, 0.0};
  const Tensor same = add_noise(img, silent, 77);
  for (std::int64_t i = 0; i < img.numel(); ++i) CHECK(same[i] == img[i]);

  NoiseSpec noisy{0.3, 0.02};
  const Tensor a = add_noise(img, noisy, 123);
  const Tensor b = add_noise(img, noisy, 123);
  for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);

  NoiseSpec full{0.0, 1.0};
  const Tensor u = add_noise(img, full, 9);
  std::vector<double> values(u.data(), u.data() + u.numel());
  CHECK(ks_against_uniform(std::move(values)) < 0.02);
}

TEST_CASE("phase filter: identity, constants, and noise suppression") {
  Rng rng(8);
  Tensor ramp({32, 48});
  for (std::int64_t y = 0; y < 32; ++y)
    for (std::int64_t x = 0; x < 48; ++x) ramp.at2(y, x) = wrap_scalar(0.25 * static_cast<double>(x));

  const Tensor id = filter_phase(ramp, 1);
  for (std::int64_t i = 0; i < ramp.numel(); ++i) CHECK(id[i] == ramp[i]);

  Tensor flat({20, 20});
  flat.fill(1.234);
  const Tensor filtered_flat = filter_phase(flat, 5);
  for (std::int64_t i = 0; i < flat.numel(); ++i)
    CHECK(filtered_flat[i] == doctest::Approx(1.234).epsilon(1e-12));

  CHECK_THROWS_AS((void)filter_phase(ramp, 4), ValidationError);

  Tensor noisy = ramp;
  for (std::int64_t i = 0; i < noisy.numel(); ++i)
    noisy[i] = wrap_scalar(noisy[i] + rng.normal(0.0, 0.3));
  const Tensor cleaned = filter_phase(noisy, 5);
  auto mad = [&](const Tensor& t) {
    double s = 0.0;
    for (std::int64_t i = 0; i < t.numel(); ++i)
      s += std::abs(std::remainder(t[i] - ramp[i], 2.0 * kPi));
    return s / static_cast<double>(t.numel());
  };
  CHECK(mad(cleaned) < mad(noisy));

  // Output range closure even near the wrap boundary.
  Tensor edge({8, 8});
  for (std::int64_t i = 0; i < edge.numel(); ++i) edge[i] = (i % 2 == 0) ? kPi - 1e-9 : -kPi;
  const Tensor out = filter_phase(edge, 3);
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out[i] >= -kPi);
    CHECK(out[i] < kPi);
  }
}

TEST_CASE("fringe count of a linear deformation gradient matches the analytic period") {
  // Displacement gradient c*x (w = c*x^2/2), shear (dx, 0): the sheared
  // phase has slope sensitivity*c*dx, so the wrapped map is periodic in x
  // with period 2*pi/(sensitivity*c*dx) pixels.
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const SpecimenSpec spec{192, 105, 500.0, 50.0};
    ShearConfig cfg;
    cfg.shear_dx = 1 + static_cast<std::int64_t>(rng.below(6));
    cfg.shear_dy = 0;
    cfg.sensitivity = rng.uniform(5.0, 25.0);
    // Keep the per-pixel phase step below pi: fringes must stay resolvable
    // on the grid for discontinuity counting to be meaningful.
    const double c = rng.uniform(0.2, 2.5) / (cfg.sensitivity * static_cast<double>(cfg.shear_dx));

    GlobalDeformationSpec g;
    g.enabled = true;
    g.mode_coefficients = {0.0, 0.0, 0.0, c / 2.0, 0.0, 0.0};
    const Tensor w = displacement_field(spec, {}, g);
    const Tensor wrapped = wrap_phase(shear_phase(w, cfg));

    const double step = cfg.sensitivity * c * static_cast<double>(cfg.shear_dx);
    const std::int64_t usable = spec.width_px - cfg.shear_dx;  // clamped tail excluded
    const double expected = step * static_cast<double>(usable - 1) / (2.0 * kPi);

    std::int64_t jumps = 0;
    for (std::int64_t x = 1; x < usable; ++x)
      if (std::abs(wrapped.at2(50, x) - wrapped.at2(50, x - 1)) > kPi) ++jumps;
    CHECK(std::abs(static_cast<double>(jumps) - expected) <= 1.0);
  }
}

TEST_CASE("generate_dataset: trivial counts, boxes, determinism") {
  GeneratorConfig config;
  config.specimen = {96, 64, 500.0, 50.0};
  config.campaign.defective_count = 6;
  config.campaign.fixed_count = 10;
  config.campaign.deformed_count = 4;
  config.campaign.defect_radius_min_px = 5.0;
  config.campaign.defect_radius_max_px = 8.0;
  config.write_png_previews = false;

  SUBCASE("fixed-only campaign") {
    GeneratorConfig fixed_only = config;
    fixed_only.campaign.defective_count = 0;
    fixed_only.campaign.deformed_count = 0;
    TempDir dir("gen_fixed");
    const auto manifest = generate_dataset(fixed_only, 42, dir.path);
    REQUIRE(manifest.samples.size() == 10);
    for (const auto& s : manifest.samples) {
      CHECK(s.defective == false);
      CHECK(s.condition == datamodel::Condition::fixed);
      CHECK(s.boxes.empty());
      CHECK(std::filesystem::exists(dir.path / s.path));
    }
  }

  SUBCASE("zero total samples is an error") {
    GeneratorConfig empty = config;
    empty.campaign.defective_count = 0;
    empty.campaign.fixed_count = 0;
    empty.campaign.deformed_count = 0;
    TempDir dir("gen_empty");
    CHECK_THROWS_AS((void)generate_dataset(empty, 1, dir.path), ValidationError);
  }

  SUBCASE("ground-truth boxes match the recomputed support mask") {
    TempDir dir("gen_boxes");
    const auto manifest = generate_dataset(config, 7, dir.path);
    int defective = 0;
    for (const auto& s : manifest.samples) {
      if (!s.defective) continue;
      ++defective;
      REQUIRE(!s.boxes.empty());
      for (const auto& b : s.boxes) {
        CHECK(b.x_min >= 0.0);
        CHECK(b.y_min >= 0.0);
        CHECK(b.x_max < static_cast<double>(config.specimen.width_px));
        CHECK(b.y_max < static_cast<double>(config.specimen.height_px));
        CHECK(b.valid());
      }
    }
    CHECK(defective == 6);

    // Oracle: re-render one defective sample and recompute the support box
    // by exhaustive scan of the analytic bump.
    std::size_t index = 0;
    for (std::size_t i = 0; i < manifest.samples.size(); ++i)
      if (manifest.samples[i].defective) index = i;
    const std::uint64_t sub = derive_subseed(7, static_cast<std::uint64_t>(index));
    const auto rendered = render_sample(config, datamodel::Condition::deformed, true, sub);
    REQUIRE(rendered.boxes.size() == manifest.samples[index].boxes.size());
    for (std::size_t bi = 0; bi < rendered.boxes.size(); ++bi)
      CHECK(rendered.boxes[bi] == manifest.samples[index].boxes[bi]);
  }

  SUBCASE("byte-identical regeneration") {
    TempDir d1("gen_det1"), d2("gen_det2");
    const auto m1 = generate_dataset(config, 2024, d1.path);
    const auto m2 = generate_dataset(config, 2024, d2.path);
    CHECK(m1 == m2);
    CHECK(sha256_file(d1.path / "manifest.json") == sha256_file(d2.path / "manifest.json"));
    for (const auto& s : m1.samples)
      CHECK(sha256_file(d1.path / s.path) == sha256_file(d2.path / s.path));
    const auto m3 = generate_dataset(config, 2025, d2.path);
    CHECK(!(m1 == m3));
  }
}

TEST_CASE("fixed defect-free samples are flat before noise") {
  GeneratorConfig config;
  config.specimen = {64, 48, 500.0, 50.0};
  config.noise = {0.0, 0.0};
  config.filter_window = 1;
  const auto sample = render_sample(config, datamodel::Condition::fixed, false, 31337);
  for (std::int64_t i = 0; i < sample.image.pixels.numel(); ++i)
    CHECK(sample.image.pixels[i] == 0.0);
}

TEST_CASE("class ratio example stays proportional to the reference corpus") {
  // 100:59:85 vs 4311:2537:3650, each within rounding of the scale factor.
  const double scale = 4311.0 / 100.0;
  CHECK(std::abs(2537.0 / scale - 59.0) < 1.0);
  CHECK(std::abs(3650.0 / scale - 85.0) < 1.0);
}
