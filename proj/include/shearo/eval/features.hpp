#pragma once

#include <string>
#include <vector>

#include "shearo/core/tensor.hpp"
#include "shearo/models/model.hpp"

namespace shearo::eval {

enum class FeatureSource { latent, pooled_backbone };

std::string to_string(FeatureSource s);
FeatureSource feature_source_from_string(const std::string& s);

/// Per-sample feature vectors for embedding: autoencoder latents (length 10
/// for the dense model, channel-pooled bottleneck for the convolutional
/// one) or channel-wise mean-pooled deepest pyramid features of the trained
/// student. Deterministic (eval mode).
Tensor extract_features(models::TrainedModel& model, const std::vector<Tensor>& phases,
                        FeatureSource source);

}  // namespace shearo::eval
