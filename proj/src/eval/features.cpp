#include "shearo/eval/features.hpp"

#include "shearo/core/error.hpp"
#include "shearo/models/preprocess.hpp"

namespace shearo::eval {

std::string to_string(FeatureSource s) {
  return s == FeatureSource::latent ? "latent" : "pooled_backbone";
}

FeatureSource feature_source_from_string(const std::string& s) {
  if (s == "latent") return FeatureSource::latent;
  if (s == "pooled_backbone") return FeatureSource::pooled_backbone;
  throw ValidationError("unknown feature source: " + s);
}

namespace {

Tensor stack_rows(const std::vector<Tensor>& rows) {
  Tensor out({static_cast<std::int64_t>(rows.size()), rows[0].numel()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].numel() != out.dim(1))
      throw ValidationError("extract_features: inconsistent feature lengths");
    for (std::int64_t k = 0; k < out.dim(1); ++k)
      out.at2(static_cast<std::int64_t>(i), k) = rows[i][k];
  }
  return out;
}

}  // namespace

Tensor extract_features(models::TrainedModel& model, const std::vector<Tensor>& phases,
                        FeatureSource source) {
  using models::ModelKind;
  if (phases.empty()) throw ValidationError("extract_features: no samples");

  if (source == FeatureSource::latent) {
    if (model.kind() == ModelKind::ae) {
      std::vector<Tensor> rows;
      for (const Tensor& phase : phases) {
        const Tensor x = models::preprocess_ae(phase).reshaped(
            {1, models::kAeWidth * models::kAeHeight});
        rows.push_back(model.dense_ae().encode(x));
      }
      return stack_rows(rows);
    }
    if (model.kind() == ModelKind::conv_ae) {
      std::vector<Tensor> rows;
      for (const Tensor& phase : phases) {
        const Tensor img = models::preprocess_convae(phase);
        rows.push_back(
            model.conv_ae().encode_pooled(img.reshaped({1, 1, img.dim(1), img.dim(2)})));
      }
      return stack_rows(rows);
    }
    throw ValidationError("latent features are defined for autoencoders only");
  }

  if (model.kind() != ModelKind::stfpm)
    throw ValidationError("pooled_backbone features are defined for the student-teacher model");
  auto& stfpm = model.stfpm();
  const auto& cfg = stfpm.config();
  std::vector<Tensor> rows;
  for (const Tensor& phase : phases) {
    const Tensor x = models::preprocess_stfpm(phase, cfg.input_height, cfg.input_width,
                                              cfg.norm_mean, cfg.norm_std);
    const auto taps =
        stfpm.student().forward(x.reshaped({1, 3, cfg.input_height, cfg.input_width}), false);
    const Tensor& deep = taps.back();
    const std::int64_t c = deep.dim(1), spatial = deep.dim(2) * deep.dim(3);
    Tensor pooled({c});
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::int64_t q = 0; q < spatial; ++q) acc += deep[ch * spatial + q];
      pooled[ch] = acc / static_cast<double>(spatial);
    }
    rows.push_back(std::move(pooled));
  }
  return stack_rows(rows);
}

}  // namespace shearo::eval
