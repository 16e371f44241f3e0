#include "shearo/models/teacher.hpp"

#include "shearo/models/preprocess.hpp"

namespace shearo::models {

PretextDataset render_pretext_dataset(const synthgen::GeneratorConfig& generator,
                                      const StfpmConfig& config, const PretextOptions& options) {
  using synthgen::Condition;
  struct Recipe {
    Condition condition;
    bool defective;
  };
  const Recipe recipes[kPretextClasses] = {{Condition::fixed, false},
                                           {Condition::deformed, false},
                                           {Condition::fixed, true},
                                           {Condition::deformed, true}};

  const std::int64_t total = options.images_per_class * kPretextClasses;
  PretextDataset data;
  data.num_classes = kPretextClasses;
  data.images = Tensor({total, 3, config.input_height, config.input_width});
  data.labels.resize(static_cast<std::size_t>(total));

  const std::int64_t image_len = 3 * config.input_height * config.input_width;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < total; ++i) {
    const std::int64_t cls = i % kPretextClasses;
    const auto& recipe = recipes[cls];
    const std::uint64_t sub = derive_subseed(options.seed, static_cast<std::uint64_t>(i));
    const auto sample = synthgen::render_sample(generator, recipe.condition, recipe.defective, sub);
    const Tensor chw = preprocess_stfpm(sample.image.pixels, config.input_height,
                                        config.input_width, config.norm_mean, config.norm_std);
    double* dst = data.images.data() + i * image_len;
    for (std::int64_t k = 0; k < image_len; ++k) dst[k] = chw[k];
    data.labels[static_cast<std::size_t>(i)] = cls;
  }
  return data;
}

std::vector<double> pretrain_teacher(Stfpm& model, const synthgen::GeneratorConfig& generator,
                                     const PretextOptions& options) {
  const PretextDataset data = render_pretext_dataset(generator, model.config(), options);
  return pretrain_backbone(model.teacher(), data, options);
}

}  // namespace shearo::models
