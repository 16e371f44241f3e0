#include "shearo/models/stfpm.hpp"

#include <cmath>

#include "shearo/core/error.hpp"
#include "shearo/kernels/resize.hpp"

namespace shearo::models {

namespace {
constexpr double kNormEps = 1e-8;
}

void StfpmConfig::validate() const {
  backbone.validate();
  if (backbone.in_channels != 3) throw ValidationError("stfpm backbone expects 3 input channels");
  if (input_width < 4 || input_height < 4)
    throw ValidationError("stfpm input resolution too small");
  if (!(norm_std > 0.0)) throw ValidationError("stfpm normalization std must be positive");
}

Tensor stfpm_layer_distance(const Tensor& teacher_feats, const Tensor& student_feats) {
  if (!teacher_feats.same_shape(student_feats) || teacher_feats.ndim() != 4)
    throw ValidationError("stfpm_layer_distance: pyramid shape mismatch " +
                          teacher_feats.shape_str() + " vs " + student_feats.shape_str());
  const std::int64_t n = teacher_feats.dim(0), c = teacher_feats.dim(1);
  const std::int64_t h = teacher_feats.dim(2), w = teacher_feats.dim(3);
  Tensor map({n, h, w});
#pragma omp parallel for schedule(static)
  for (std::int64_t pos = 0; pos < n * h * w; ++pos) {
    const std::int64_t s = pos / (h * w);
    const std::int64_t q = pos % (h * w);
    const double* tp = teacher_feats.data() + s * c * h * w + q;
    const double* sp = student_feats.data() + s * c * h * w + q;
    double t_norm = 0.0, s_norm = 0.0;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double tv = tp[ch * h * w], sv = sp[ch * h * w];
      t_norm += tv * tv;
      s_norm += sv * sv;
    }
    t_norm = std::sqrt(t_norm) + kNormEps;
    s_norm = std::sqrt(s_norm) + kNormEps;
    double acc = 0.0;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double d = tp[ch * h * w] / t_norm - sp[ch * h * w] / s_norm;
      acc += d * d;
    }
    map[pos] = 0.5 * acc;
  }
  return map;
}

double stfpm_loss(const std::vector<Tensor>& distance_maps) {
  if (distance_maps.empty()) throw ValidationError("stfpm_loss needs at least one layer");
  double total = 0.0;
  for (const Tensor& map : distance_maps) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < map.numel(); ++i) acc += map[i];
    total += acc / static_cast<double>(map.numel());
  }
  return total;
}

Stfpm::Stfpm(const StfpmConfig& config, std::uint64_t seed)
    : config_([&] {
        config.validate();
        return config;
      }()),
      teacher_([&] {
        Rng rng(derive_subseed(seed, 0));
        return nn::Backbone(config.backbone, rng);
      }()),
      student_([&] {
        Rng rng(derive_subseed(seed, 1));
        return nn::Backbone(config.backbone, rng);
      }()) {}

std::vector<Tensor> Stfpm::distance_grads(const std::vector<Tensor>& teacher_taps,
                                          const std::vector<Tensor>& student_taps,
                                          std::vector<Tensor>* maps_out) {
  if (teacher_taps.size() != student_taps.size())
    throw ValidationError("stfpm: pyramid layer count mismatch");
  std::vector<Tensor> grads;
  if (maps_out) maps_out->clear();
  for (std::size_t l = 0; l < teacher_taps.size(); ++l) {
    const Tensor& t = teacher_taps[l];
    const Tensor& s = student_taps[l];
    if (!t.same_shape(s)) throw ValidationError("stfpm: pyramid shape mismatch at layer");
    if (maps_out) maps_out->push_back(stfpm_layer_distance(t, s));

    const std::int64_t n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
    const double inv_count = 1.0 / static_cast<double>(n * h * w);
    Tensor grad = Tensor::zeros_like(s);
#pragma omp parallel for schedule(static)
    for (std::int64_t pos = 0; pos < n * h * w; ++pos) {
      const std::int64_t sample = pos / (h * w);
      const std::int64_t q = pos % (h * w);
      const double* tp = t.data() + sample * c * h * w + q;
      const double* sp = s.data() + sample * c * h * w + q;
      double* gp = grad.data() + sample * c * h * w + q;
      double t_norm = 0.0, s_norm = 0.0;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        t_norm += tp[ch * h * w] * tp[ch * h * w];
        s_norm += sp[ch * h * w] * sp[ch * h * w];
      }
      const double r = std::sqrt(s_norm);
      t_norm = std::sqrt(t_norm) + kNormEps;
      const double denom = r + kNormEps;
      // dL/ds_hat, then through s_hat = s / (||s|| + eps).
      double dot = 0.0;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double s_hat = sp[ch * h * w] / denom;
        const double t_hat = tp[ch * h * w] / t_norm;
        const double g_hat = (s_hat - t_hat) * inv_count;
        gp[ch * h * w] = g_hat / denom;
        dot += sp[ch * h * w] * g_hat;
      }
      if (r > 0.0) {
        const double scale = dot / (r * denom * denom);
        for (std::int64_t ch = 0; ch < c; ++ch) gp[ch * h * w] -= sp[ch * h * w] * scale;
      }
    }
    grads.push_back(std::move(grad));
  }
  return grads;
}

double Stfpm::loss_and_backward(const Tensor& x, const std::vector<Tensor>& teacher_taps) {
  const std::vector<Tensor> student_taps = student_.forward(x, /*training=*/true);
  std::vector<Tensor> maps;
  const std::vector<Tensor> grads = distance_grads(teacher_taps, student_taps, &maps);
  student_.backward(grads);
  return stfpm_loss(maps);
}

double Stfpm::loss_eval(const Tensor& x, const std::vector<Tensor>& teacher_taps) {
  const std::vector<Tensor> student_taps = student_.forward(x, /*training=*/false);
  std::vector<Tensor> maps;
  for (std::size_t l = 0; l < teacher_taps.size(); ++l)
    maps.push_back(stfpm_layer_distance(teacher_taps[l], student_taps[l]));
  return stfpm_loss(maps);
}

Tensor Stfpm::anomaly_map(const Tensor& chw) {
  if (chw.ndim() != 3 || chw.dim(0) != 3)
    throw ValidationError("anomaly_map expects a preprocessed (3,H,W) image");
  const std::int64_t h = chw.dim(1), w = chw.dim(2);
  const Tensor batched = chw.reshaped({1, 3, h, w});
  const std::vector<Tensor> t_taps = teacher_.forward(batched, false);
  const std::vector<Tensor> s_taps = student_.forward(batched, false);

  Tensor combined;
  for (std::size_t l = 0; l < t_taps.size(); ++l) {
    const Tensor map = stfpm_layer_distance(t_taps[l], s_taps[l]);
    const Tensor up =
        kernels::bilinear_resize(map.reshaped({map.dim(1), map.dim(2)}), h, w);
    if (l == 0) {
      combined = up;
      continue;
    }
    double* cp = combined.data();
    const double* upp = up.data();
    if (config_.combine == StfpmConfig::Combine::product) {
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < combined.numel(); ++i) cp[i] *= upp[i];
    } else {
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < combined.numel(); ++i) cp[i] += upp[i];
    }
  }
  return combined;
}

}  // namespace shearo::models
