#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shearo/core/tensor.hpp"
#include "shearo/datamodel/datamodel.hpp"

namespace shearo::synthgen {

/// Image grid plus the physical footprint it stands for. Defaults mirror a
/// 500 mm x 50 mm strip on a 192 x 105 grid.
struct SpecimenSpec {
  std::int64_t width_px = 192;
  std::int64_t height_px = 105;
  double physical_width_mm = 500.0;
  double physical_height_mm = 50.0;

  void validate() const;
  double mm_per_px_x() const { return physical_width_mm / static_cast<double>(width_px); }
  double mm_per_px_y() const { return physical_height_mm / static_cast<double>(height_px); }
};

enum class DefectProfile { gaussian, plateau };

/// One subsurface inclusion, modeled as an out-of-plane displacement bump.
struct DefectSpec {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius_px = 8.0;
  double bump_height = 1.0;
  DefectProfile profile = DefectProfile::gaussian;

  /// Fraction of bump_height below which a pixel no longer counts as defect
  /// support; fixes the ground-truth box.
  static constexpr double kAnnotationCutoff = 0.05;

  double bump_at(double x, double y) const;
  /// Radius of the |bump| >= cutoff * |height| disc.
  double support_radius() const;
  void validate(const SpecimenSpec& spec) const;
};

/// Low-order 2-D polynomial displacement, total degree <= 2.
/// Coefficients in basis order {1, x, y, x^2, x*y, y^2}, pixel coordinates.
struct GlobalDeformationSpec {
  std::vector<double> mode_coefficients = std::vector<double>(6, 0.0);
  bool enabled = false;

  void validate(double max_coefficient) const;
  double value_at(double x, double y) const;
};

struct ShearConfig {
  std::int64_t shear_dx = 4;
  std::int64_t shear_dy = 0;
  double sensitivity = 18.0;  // phase radians per displacement-unit difference

  void validate(const SpecimenSpec& spec) const;
};

struct NoiseSpec {
  double speckle_sigma = 0.3;          // std-dev of additive wrapped phase noise (rad)
  double decorrelation_fraction = 0.02;  // fraction of pixels replaced by uniform phase

  void validate() const;
};

using Condition = datamodel::Condition;

/// A single wrapped shearogram with its acquisition metadata.
struct PhaseImage {
  Tensor pixels;  // (H,W), values in [-pi, pi)
  Condition condition = Condition::fixed;
  bool defective = false;
  std::uint64_t seed = 0;
};

// --- forward model --------------------------------------------------------

/// Out-of-plane displacement field: polynomial global mode plus defect bumps.
Tensor displacement_field(const SpecimenSpec& spec, const std::vector<DefectSpec>& defects,
                          const GlobalDeformationSpec& global);

/// Unwrapped shear phase: sensitivity * (w(x+dx, y+dy) - w(x, y)) with
/// edge-replicated displacement at the borders.
Tensor shear_phase(const Tensor& w, const ShearConfig& cfg);

/// Reduces every value modulo 2*pi into [-pi, pi).
double wrap_scalar(double phase);
Tensor wrap_phase(const Tensor& unwrapped);

/// Additive Gaussian phase noise, re-wrapped, then seeded decorrelation:
/// a without-replacement pixel sample replaced by uniform [-pi, pi) values.
Tensor add_noise(const Tensor& wrapped, const NoiseSpec& noise, std::uint64_t seed);

/// Windowed sine/cosine averaging filter; window must be odd.
Tensor filter_phase(const Tensor& wrapped, std::int64_t window);

// --- dataset generation ----------------------------------------------------

/// Sampling ranges for the randomized campaign.
struct CampaignSpec {
  std::int64_t defective_count = 100;
  std::int64_t fixed_count = 59;
  std::int64_t deformed_count = 85;

  double defect_radius_min_px = 6.0;
  double defect_radius_max_px = 12.0;
  double defect_height_min = 0.8;
  double defect_height_max = 1.4;
  double two_defect_probability = 0.35;
  double plateau_probability = 0.5;  // profile draw: plateau vs gaussian

  /// Global deformation is sampled so the linear term sweeps roughly this
  /// many fringes across the image width; quadratic and cross terms chirp
  /// and tilt the pattern.
  double max_fringes = 4.0;
  double max_coefficient = 1.0;  // hard bound on any sampled coefficient

  /// Scale applied to the sampled global deformation of defective frames
  /// (they are acquired under excitation, so they carry fringes too).
  double defective_global_scale = 1.0;

  void validate() const;
};

struct GeneratorConfig {
  SpecimenSpec specimen;
  ShearConfig shear;
  NoiseSpec noise;
  CampaignSpec campaign;
  std::int64_t filter_window = 5;  // 1 disables filtering
  bool write_png_previews = true;

  void validate() const;
};

/// Renders one sample. Exposed for tests; generate_dataset composes it.
struct RenderedSample {
  PhaseImage image;
  std::vector<datamodel::BoundingBox> boxes;
};
RenderedSample render_sample(const GeneratorConfig& config, Condition condition, bool defective,
                             std::uint64_t sample_seed);

/// Ground-truth box of one defect: tight pixel box of the support mask,
/// inclusive pixel-index coordinates.
datamodel::BoundingBox defect_box(const SpecimenSpec& spec, const DefectSpec& defect);

/// Canonical digest of (config, seed); stored in the manifest.
std::string generator_config_hash(const GeneratorConfig& config, std::uint64_t seed);

/// Writes PHZ1 files (plus optional PNG previews) and returns the manifest.
/// Deterministic given (config, seed); samples are rendered in parallel from
/// per-sample sub-seeds.
datamodel::DatasetManifest generate_dataset(const GeneratorConfig& config, std::uint64_t seed,
                                            const std::filesystem::path& output_dir);

}  // namespace shearo::synthgen
