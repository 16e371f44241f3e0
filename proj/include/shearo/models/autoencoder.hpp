#pragma once

#include <cstdint>
#include <vector>

#include "shearo/nn/layers.hpp"

namespace shearo::models {

/// Fully connected autoencoder: 4800 -> 256 -> 128 -> 64 -> 10, decoder
/// mirrored, dropout + rectifier after every hidden layer.
struct AeConfig {
  std::int64_t input_width = 96;
  std::int64_t input_height = 50;
  std::vector<std::int64_t> encoder_dims = {256, 128, 64, 10};
  double dropout_rate = 0.2;

  std::int64_t flat_input() const { return input_width * input_height; }
  std::int64_t latent_dim() const { return encoder_dims.back(); }
  void validate() const;
  bool operator==(const AeConfig&) const = default;
};

class DenseAutoencoder {
 public:
  DenseAutoencoder(const AeConfig& config, std::uint64_t seed);

  const AeConfig& config() const { return config_; }
  /// x (N, flat_input) -> reconstruction of the same shape.
  Tensor forward(const Tensor& x, bool training);
  /// Gradient of a loss w.r.t. the reconstruction; accumulates param grads.
  void backward(const Tensor& grad_out);
  /// Eval-mode latent vectors (N, latent_dim).
  Tensor encode(const Tensor& x);

  std::vector<nn::Param*> params();
  void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {}
  Rng& rng() { return rng_; }

 private:
  AeConfig config_;
  Rng rng_;
  nn::Sequential encoder_;
  nn::Sequential decoder_;
};

/// Convolutional autoencoder: stride-2 3x3 conv stack (96, 128, 256, 256
/// feature maps), batch normalization and leaky rectifier per layer, decoder
/// mirrored with transposed convolutions.
struct ConvAeConfig {
  std::int64_t input_width = 96;
  std::int64_t input_height = 50;
  std::vector<std::int64_t> channels = {96, 128, 256, 256};
  double leaky_slope = 0.01;

  void validate() const;
  bool operator==(const ConvAeConfig&) const = default;
};

class ConvAutoencoder {
 public:
  ConvAutoencoder(const ConvAeConfig& config, std::uint64_t seed);

  const ConvAeConfig& config() const { return config_; }
  /// x (N, 1, H, W) -> reconstruction of the same shape.
  Tensor forward(const Tensor& x, bool training);
  void backward(const Tensor& grad_out);
  /// Eval-mode bottleneck features, channel-wise mean pooled to (N, C).
  Tensor encode_pooled(const Tensor& x);

  std::vector<nn::Param*> params();
  void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out);
  Rng& rng() { return rng_; }

 private:
  ConvAeConfig config_;
  Rng rng_;
  nn::Sequential encoder_;
  nn::Sequential decoder_;
};

}  // namespace shearo::models
