#pragma once

#include "shearo/models/stfpm.hpp"
#include "shearo/models/train.hpp"
#include "shearo/synthgen/synthgen.hpp"

namespace shearo::models {

/// Pretext classes: the cross of {fixed, deformed} x {clean, defective}.
inline constexpr std::int64_t kPretextClasses = 4;

/// Renders throwaway synthetic images for teacher pretraining, preprocessed
/// to the model grid. Deterministic given options.seed.
PretextDataset render_pretext_dataset(const synthgen::GeneratorConfig& generator,
                                      const StfpmConfig& config, const PretextOptions& options);

/// Convenience wrapper: renders the pretext data and trains model.teacher()
/// in place. Returns per-epoch pretext accuracy.
std::vector<double> pretrain_teacher(Stfpm& model, const synthgen::GeneratorConfig& generator,
                                     const PretextOptions& options);

}  // namespace shearo::models
