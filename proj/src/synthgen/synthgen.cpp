#include "shearo/synthgen/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "shearo/core/image_io.hpp"
#include "shearo/core/rng.hpp"
#include "shearo/core/sha256.hpp"

namespace shearo::synthgen {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

// --- specs -----------------------------------------------------------------

void SpecimenSpec::validate() const {
  if (width_px < 16 || height_px < 16)
    throw ValidationError("specimen grid must be at least 16x16 pixels");
  if (!(physical_width_mm > 0.0) || !(physical_height_mm > 0.0))
    throw ValidationError("physical dimensions must be strictly positive");
}

double DefectSpec::bump_at(double x, double y) const {
  const double dx = x - center_x;
  const double dy = y - center_y;
  const double d2 = dx * dx + dy * dy;
  switch (profile) {
    case DefectProfile::gaussian: {
      const double sigma = radius_px / 2.0;
      return bump_height * std::exp(-0.5 * d2 / (sigma * sigma));
    }
    case DefectProfile::plateau: {
      // Super-Gaussian: flat top, steep shoulder near radius_px.
      const double r6 = std::pow(d2 / (radius_px * radius_px), 3.0);
      return bump_height * std::exp(-r6);
    }
  }
  return 0.0;
}

double DefectSpec::support_radius() const {
  const double ln_cut = -std::log(kAnnotationCutoff);
  switch (profile) {
    case DefectProfile::gaussian:
      return (radius_px / 2.0) * std::sqrt(2.0 * ln_cut);
    case DefectProfile::plateau:
      return radius_px * std::pow(ln_cut, 1.0 / 6.0);
  }
  return 0.0;
}

void DefectSpec::validate(const SpecimenSpec& spec) const {
  if (!(radius_px > 0.0)) throw ValidationError("defect radius must be positive");
  if (bump_height == 0.0) throw ValidationError("defect bump height must be nonzero");
  const double r = support_radius();
  if (center_x - r < 0.0 || center_x + r > static_cast<double>(spec.width_px - 1) ||
      center_y - r < 0.0 || center_y + r > static_cast<double>(spec.height_px - 1))
    throw ValidationError("defect support extends outside the image (center " +
                          std::to_string(center_x) + "," + std::to_string(center_y) +
                          ", support radius " + std::to_string(r) + ")");
}

void GlobalDeformationSpec::validate(double max_coefficient) const {
  if (mode_coefficients.size() != 6)
    throw ValidationError("global deformation expects 6 polynomial coefficients");
  for (double c : mode_coefficients) {
    if (!enabled && c != 0.0)
      throw ValidationError("disabled global deformation must have zero coefficients");
    if (std::abs(c) > max_coefficient)
      throw ValidationError("global mode coefficient exceeds configured maximum");
  }
}

double GlobalDeformationSpec::value_at(double x, double y) const {
  if (!enabled) return 0.0;
  const auto& c = mode_coefficients;
  return c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
}

void ShearConfig::validate(const SpecimenSpec& spec) const {
  if (shear_dx == 0 && shear_dy == 0) throw ValidationError("shear vector must be nonzero");
  if (std::abs(shear_dx) * 10 >= spec.width_px || std::abs(shear_dy) * 10 >= spec.height_px)
    throw ValidationError("shear magnitude must stay below 10% of the image dimensions");
  if (!(sensitivity > 0.0)) throw ValidationError("sensitivity must be positive");
}

void NoiseSpec::validate() const {
  if (speckle_sigma < 0.0) throw ValidationError("speckle_sigma must be non-negative");
  if (decorrelation_fraction < 0.0 || decorrelation_fraction > 1.0)
    throw ValidationError("decorrelation_fraction must lie in [0,1]");
}

void CampaignSpec::validate() const {
  if (defective_count < 0 || fixed_count < 0 || deformed_count < 0)
    throw ValidationError("per-class counts must be non-negative");
  if (!(defect_radius_min_px > 0.0) || defect_radius_max_px < defect_radius_min_px)
    throw ValidationError("invalid defect radius range");
  if (defect_height_max < defect_height_min)
    throw ValidationError("invalid defect height range");
  if (two_defect_probability < 0.0 || two_defect_probability > 1.0)
    throw ValidationError("two_defect_probability must lie in [0,1]");
  if (plateau_probability < 0.0 || plateau_probability > 1.0)
    throw ValidationError("plateau_probability must lie in [0,1]");
  if (!(max_fringes >= 0.0) || !(max_coefficient > 0.0) || defective_global_scale < 0.0)
    throw ValidationError("invalid global deformation sampling parameters");
}

void GeneratorConfig::validate() const {
  specimen.validate();
  shear.validate(specimen);
  noise.validate();
  campaign.validate();
  if (filter_window < 1 || filter_window % 2 == 0 || filter_window >= specimen.height_px ||
      filter_window >= specimen.width_px)
    throw ValidationError("filter window must be odd and smaller than the image");
}

// --- forward model ---------------------------------------------------------

Tensor displacement_field(const SpecimenSpec& spec, const std::vector<DefectSpec>& defects,
                          const GlobalDeformationSpec& global) {
  spec.validate();
  if (defects.size() > 2) throw ValidationError("at most two defects per frame");
  for (const auto& d : defects) d.validate(spec);

  Tensor w({spec.height_px, spec.width_px});
#pragma omp parallel for schedule(static)
  for (std::int64_t y = 0; y < spec.height_px; ++y) {
    for (std::int64_t x = 0; x < spec.width_px; ++x) {
      double v = global.value_at(static_cast<double>(x), static_cast<double>(y));
      for (const auto& d : defects) v += d.bump_at(static_cast<double>(x), static_cast<double>(y));
      w.at2(y, x) = v;
    }
  }
  return w;
}

Tensor shear_phase(const Tensor& w, const ShearConfig& cfg) {
  if (w.ndim() != 2) throw ValidationError("displacement field must be (H,W)");
  const std::int64_t h = w.dim(0), wd = w.dim(1);
  Tensor phi({h, wd});
#pragma omp parallel for schedule(static)
  for (std::int64_t y = 0; y < h; ++y) {
    const std::int64_t ys = std::clamp<std::int64_t>(y + cfg.shear_dy, 0, h - 1);
    for (std::int64_t x = 0; x < wd; ++x) {
      const std::int64_t xs = std::clamp<std::int64_t>(x + cfg.shear_dx, 0, wd - 1);
      phi.at2(y, x) = cfg.sensitivity * (w.at2(ys, xs) - w.at2(y, x));
    }
  }
  return phi;
}

double wrap_scalar(double phase) {
  double y = std::fmod(phase + kPi, kTwoPi);
  if (y < 0.0) y += kTwoPi;
  return y - kPi;
}

Tensor wrap_phase(const Tensor& unwrapped) {
  Tensor out = unwrapped;
  double* p = out.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < out.numel(); ++i) p[i] = wrap_scalar(p[i]);
  return out;
}

Tensor add_noise(const Tensor& wrapped, const NoiseSpec& noise, std::uint64_t seed) {
  noise.validate();
  Tensor out = wrapped;
  Rng rng(seed);
  const std::int64_t n = out.numel();
  if (noise.speckle_sigma > 0.0) {
    for (std::int64_t i = 0; i < n; ++i)
      out[i] = wrap_scalar(out[i] + rng.normal(0.0, noise.speckle_sigma));
  }
  const auto replaced = static_cast<std::size_t>(
      std::llround(noise.decorrelation_fraction * static_cast<double>(n)));
  if (replaced > 0) {
    const auto picks = rng.sample_without_replacement(static_cast<std::size_t>(n), replaced);
    for (const std::size_t i : picks) out[static_cast<std::int64_t>(i)] = rng.uniform(-kPi, kPi);
  }
  return out;
}

Tensor filter_phase(const Tensor& wrapped, std::int64_t window) {
  if (window < 1 || window % 2 == 0) throw ValidationError("filter window must be odd and >= 1");
  if (wrapped.ndim() != 2 || window >= wrapped.dim(0) || window >= wrapped.dim(1))
    throw ValidationError("filter window must be smaller than both image dimensions");
  if (window == 1) return wrapped;

  const std::int64_t h = wrapped.dim(0), w = wrapped.dim(1);
  const std::int64_t r = window / 2;
  Tensor sin_t({h, w}), cos_t({h, w});
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < wrapped.numel(); ++i) {
    sin_t[i] = std::sin(wrapped[i]);
    cos_t[i] = std::cos(wrapped[i]);
  }
  Tensor out({h, w});
#pragma omp parallel for schedule(static)
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      double ss = 0.0, cs = 0.0;
      for (std::int64_t dy = -r; dy <= r; ++dy) {
        const std::int64_t yy = std::clamp<std::int64_t>(y + dy, 0, h - 1);
        for (std::int64_t dx = -r; dx <= r; ++dx) {
          const std::int64_t xx = std::clamp<std::int64_t>(x + dx, 0, w - 1);
          ss += sin_t.at2(yy, xx);
          cs += cos_t.at2(yy, xx);
        }
      }
      out.at2(y, x) = wrap_scalar(std::atan2(ss, cs));
    }
  }
  return out;
}

// --- dataset generation ----------------------------------------------------

datamodel::BoundingBox defect_box(const SpecimenSpec& spec, const DefectSpec& defect) {
  const double cutoff = DefectSpec::kAnnotationCutoff * std::abs(defect.bump_height);
  std::int64_t x_min = spec.width_px, x_max = -1, y_min = spec.height_px, y_max = -1;
  for (std::int64_t y = 0; y < spec.height_px; ++y) {
    for (std::int64_t x = 0; x < spec.width_px; ++x) {
      if (std::abs(defect.bump_at(static_cast<double>(x), static_cast<double>(y))) >= cutoff) {
        x_min = std::min(x_min, x);
        x_max = std::max(x_max, x);
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
      }
    }
  }
  if (x_max < x_min || y_max <= y_min || x_max <= x_min)
    throw ValidationError("defect support too small for a valid bounding box");
  return {static_cast<double>(x_min), static_cast<double>(y_min), static_cast<double>(x_max),
          static_cast<double>(y_max)};
}

namespace {

// Linear coefficient that sweeps `fringes` 2*pi cycles across the span.
double fringe_coefficient(double fringes, double sensitivity, double shear_step, double span) {
  if (shear_step == 0.0 || span <= 0.0) return 0.0;
  return kTwoPi * fringes / (sensitivity * shear_step * span);
}

GlobalDeformationSpec sample_global(const GeneratorConfig& config, Rng& rng, double scale) {
  const auto& c = config.campaign;
  const auto& sh = config.shear;
  const double w_span = static_cast<double>(config.specimen.width_px);
  const double h_span = static_cast<double>(config.specimen.height_px);
  const double dx = static_cast<double>(sh.shear_dx);
  const double dy = static_cast<double>(sh.shear_dy);

  GlobalDeformationSpec g;
  g.enabled = true;
  auto& m = g.mode_coefficients;
  const double fx = rng.uniform(-c.max_fringes, c.max_fringes);
  const double fq = rng.uniform(-c.max_fringes, c.max_fringes);
  const double ft = rng.uniform(-c.max_fringes, c.max_fringes);
  // Linear ramp along the shear direction.
  m[1] = fringe_coefficient(fx, sh.sensitivity, dx != 0.0 ? dx : dy, w_span) * scale;
  // Chirp: x^2 makes the local slope (and fringe density) drift across x.
  m[3] = fringe_coefficient(fq, sh.sensitivity, dx != 0.0 ? dx : dy, w_span * w_span) * scale;
  // Tilt: the xy term rotates fringes away from vertical.
  m[4] = fringe_coefficient(ft, sh.sensitivity, dx != 0.0 ? dx : dy, w_span * h_span) * scale;
  for (auto& v : m) v = std::clamp(v, -c.max_coefficient, c.max_coefficient);
  if (scale == 0.0) {
    g.enabled = false;
    std::fill(m.begin(), m.end(), 0.0);
  }
  return g;
}

std::vector<DefectSpec> sample_defects(const GeneratorConfig& config, Rng& rng) {
  const auto& c = config.campaign;
  const int count = rng.uniform() < c.two_defect_probability ? 2 : 1;
  std::vector<DefectSpec> defects;
  for (int k = 0; k < count; ++k) {
    DefectSpec d;
    d.radius_px = rng.uniform(c.defect_radius_min_px, c.defect_radius_max_px);
    d.bump_height = rng.uniform(c.defect_height_min, c.defect_height_max);
    if (rng.uniform() < 0.5) d.bump_height = -d.bump_height;
    d.profile = rng.uniform() < c.plateau_probability ? DefectProfile::plateau
                                                       : DefectProfile::gaussian;
    const double margin = d.support_radius() + 1.0;
    const double x_lo = margin, x_hi = static_cast<double>(config.specimen.width_px - 1) - margin;
    const double y_lo = margin, y_hi = static_cast<double>(config.specimen.height_px - 1) - margin;
    if (x_hi <= x_lo || y_hi <= y_lo)
      throw ValidationError("image too small for the configured defect sizes");
    // Keep two defects apart so their supports stay distinct.
    for (int attempt = 0; attempt < 64; ++attempt) {
      d.center_x = rng.uniform(x_lo, x_hi);
      d.center_y = rng.uniform(y_lo, y_hi);
      bool ok = true;
      for (const auto& other : defects) {
        const double dist = std::hypot(d.center_x - other.center_x, d.center_y - other.center_y);
        if (dist < d.support_radius() + other.support_radius() + 2.0) ok = false;
      }
      if (ok) break;
      if (attempt == 63) ok = true;  // crowded config: accept overlap rather than loop forever
    }
    defects.push_back(d);
  }
  return defects;
}

std::string sample_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%06zu", index);
  return buf;
}

}  // namespace

RenderedSample render_sample(const GeneratorConfig& config, Condition condition, bool defective,
                             std::uint64_t sample_seed) {
  Rng rng(sample_seed);

  GlobalDeformationSpec global;  // disabled, all zeros
  if (condition == Condition::deformed) {
    const double scale = defective ? config.campaign.defective_global_scale : 1.0;
    global = sample_global(config, rng, scale);
  }
  std::vector<DefectSpec> defects;
  if (defective) defects = sample_defects(config, rng);

  const Tensor w = displacement_field(config.specimen, defects, global);
  Tensor phase = wrap_phase(shear_phase(w, config.shear));
  phase = add_noise(phase, config.noise, rng.next_u64());
  if (config.filter_window > 1) phase = filter_phase(phase, config.filter_window);

  RenderedSample out;
  out.image.pixels = std::move(phase);
  out.image.condition = condition;
  out.image.defective = defective;
  out.image.seed = sample_seed;
  for (const auto& d : defects) out.boxes.push_back(defect_box(config.specimen, d));
  return out;
}

std::string generator_config_hash(const GeneratorConfig& config, std::uint64_t seed) {
  std::ostringstream os;
  os.precision(17);
  const auto& s = config.specimen;
  const auto& sh = config.shear;
  const auto& n = config.noise;
  const auto& c = config.campaign;
  os << "specimen:" << s.width_px << ',' << s.height_px << ',' << s.physical_width_mm << ','
     << s.physical_height_mm << ";shear:" << sh.shear_dx << ',' << sh.shear_dy << ','
     << sh.sensitivity << ";noise:" << n.speckle_sigma << ',' << n.decorrelation_fraction
     << ";campaign:" << c.defective_count << ',' << c.fixed_count << ',' << c.deformed_count << ','
     << c.defect_radius_min_px << ',' << c.defect_radius_max_px << ',' << c.defect_height_min
     << ',' << c.defect_height_max << ',' << c.two_defect_probability << ',' << c.max_fringes
     << ',' << c.max_coefficient << ',' << c.defective_global_scale << ','
     << c.plateau_probability
     << ";filter:" << config.filter_window << ";png:" << config.write_png_previews
     << ";seed:" << seed;
  return sha256_hex(os.str());
}

datamodel::DatasetManifest generate_dataset(const GeneratorConfig& config, std::uint64_t seed,
                                            const std::filesystem::path& output_dir) {
  config.validate();
  const auto& c = config.campaign;
  const std::int64_t total = c.defective_count + c.fixed_count + c.deformed_count;
  if (total <= 0) throw ValidationError("dataset must contain at least one sample");

  std::error_code ec;
  std::filesystem::create_directories(output_dir / "images", ec);
  if (ec) throw IoError("cannot create output directory: " + output_dir.string());

  struct Slot {
    Condition condition;
    bool defective;
  };
  std::vector<Slot> slots;
  slots.reserve(static_cast<std::size_t>(total));
  for (std::int64_t i = 0; i < c.defective_count; ++i)
    slots.push_back({Condition::deformed, true});
  for (std::int64_t i = 0; i < c.fixed_count; ++i) slots.push_back({Condition::fixed, false});
  for (std::int64_t i = 0; i < c.deformed_count; ++i)
    slots.push_back({Condition::deformed, false});

  std::vector<datamodel::SampleRecord> records(slots.size());
  std::vector<std::string> errors(slots.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(slots.size()); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      const std::uint64_t sub = derive_subseed(seed, static_cast<std::uint64_t>(i));
      const RenderedSample sample =
          render_sample(config, slots[idx].condition, slots[idx].defective, sub);
      const std::string id = sample_id(idx);
      const std::string rel = "images/" + id + ".phz";
      write_tensor_file(output_dir / rel, sample.image.pixels, kPhaseMagic);
      if (config.write_png_previews)
        write_png_gray(output_dir / "previews" / (id + ".png"), sample.image.pixels, -kPi, kPi);

      datamodel::SampleRecord rec;
      rec.id = id;
      rec.path = rel;
      rec.condition = slots[idx].condition;
      rec.defective = slots[idx].defective;
      rec.boxes = sample.boxes;
      records[idx] = std::move(rec);
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw ValidationError("sample generation failed: " + e);

  datamodel::DatasetManifest manifest;
  manifest.samples = std::move(records);
  manifest.generator_config_hash = generator_config_hash(config, seed);
  manifest.validate();
  save_manifest(manifest, output_dir / "manifest.json");
  return manifest;
}

}  // namespace shearo::synthgen
