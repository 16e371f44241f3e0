#include "shearo/models/autoencoder.hpp"

#include "shearo/core/error.hpp"

namespace shearo::models {

void AeConfig::validate() const {
  if (input_width < 1 || input_height < 1) throw ValidationError("AE input size must be positive");
  if (encoder_dims.empty()) throw ValidationError("AE encoder needs at least one layer");
  for (auto d : encoder_dims)
    if (d < 1) throw ValidationError("AE layer widths must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ValidationError("AE dropout rate must lie in [0,1)");
}

DenseAutoencoder::DenseAutoencoder(const AeConfig& config, std::uint64_t seed)
    : config_(config), rng_(seed) {
  config.validate();
  std::int64_t in = config.flat_input();
  for (const std::int64_t out : config.encoder_dims) {
    encoder_.add(std::make_unique<nn::Linear>(in, out, rng_));
    encoder_.add(std::make_unique<nn::Dropout>(config.dropout_rate, rng_));
    encoder_.add(std::make_unique<nn::ReLU>());
    in = out;
  }
  std::vector<std::int64_t> decoder_dims(config.encoder_dims.rbegin() + 1,
                                         config.encoder_dims.rend());
  decoder_dims.push_back(config.flat_input());
  for (std::size_t i = 0; i < decoder_dims.size(); ++i) {
    decoder_.add(std::make_unique<nn::Linear>(in, decoder_dims[i], rng_));
    if (i + 1 < decoder_dims.size()) {
      decoder_.add(std::make_unique<nn::Dropout>(config.dropout_rate, rng_));
      decoder_.add(std::make_unique<nn::ReLU>());
    } else {
      decoder_.add(std::make_unique<nn::Sigmoid>());
    }
    in = decoder_dims[i];
  }
  encoder_.set_name_prefix("encoder");
  decoder_.set_name_prefix("decoder");
}

Tensor DenseAutoencoder::forward(const Tensor& x, bool training) {
  if (x.ndim() != 2 || x.dim(1) != config_.flat_input())
    throw ValidationError("AE forward expects (N, " + std::to_string(config_.flat_input()) + ")");
  return decoder_.forward(encoder_.forward(x, training), training);
}

void DenseAutoencoder::backward(const Tensor& grad_out) {
  encoder_.backward(decoder_.backward(grad_out));
}

Tensor DenseAutoencoder::encode(const Tensor& x) {
  if (x.ndim() != 2 || x.dim(1) != config_.flat_input())
    throw ValidationError("AE encode expects (N, " + std::to_string(config_.flat_input()) + ")");
  return encoder_.forward(x, /*training=*/false);
}

std::vector<nn::Param*> DenseAutoencoder::params() {
  std::vector<nn::Param*> out;
  encoder_.collect_params(out);
  decoder_.collect_params(out);
  return out;
}

// --- ConvAutoencoder ---------------------------------------------------------

void ConvAeConfig::validate() const {
  if (input_width < 8 || input_height < 8)
    throw ValidationError("ConvAE input size too small for the stride-2 stack");
  if (channels.empty()) throw ValidationError("ConvAE needs at least one conv layer");
  for (auto c : channels)
    if (c < 1) throw ValidationError("ConvAE channel counts must be positive");
}

ConvAutoencoder::ConvAutoencoder(const ConvAeConfig& config, std::uint64_t seed)
    : config_(config), rng_(seed) {
  config.validate();

  // Track the spatial chain so each transposed layer can recover its mirror
  // shape exactly via output_padding.
  std::vector<std::pair<std::int64_t, std::int64_t>> shapes;  // (h, w) before each conv
  std::int64_t h = config.input_height, w = config.input_width;
  std::int64_t in = 1;
  for (const std::int64_t out : config.channels) {
    shapes.emplace_back(h, w);
    encoder_.add(std::make_unique<nn::Conv2d>(in, out, 3, 2, 1, rng_));
    encoder_.add(std::make_unique<nn::BatchNorm2d>(out));
    encoder_.add(std::make_unique<nn::LeakyReLU>(config.leaky_slope));
    h = (h + 2 - 3) / 2 + 1;
    w = (w + 2 - 3) / 2 + 1;
    if (h < 1 || w < 1) throw ValidationError("ConvAE input too small for the configured depth");
    in = out;
  }

  for (std::size_t i = config.channels.size(); i-- > 0;) {
    const std::int64_t out = i == 0 ? 1 : config.channels[i - 1];
    const auto [th, tw] = shapes[i];
    const std::int64_t oph = th - ((h - 1) * 2 - 2 + 3);
    const std::int64_t opw = tw - ((w - 1) * 2 - 2 + 3);
    decoder_.add(std::make_unique<nn::ConvTranspose2d>(in, out, 3, 2, 1, oph, opw, rng_));
    if (i != 0) {
      decoder_.add(std::make_unique<nn::BatchNorm2d>(out));
      decoder_.add(std::make_unique<nn::LeakyReLU>(config.leaky_slope));
    } else {
      decoder_.add(std::make_unique<nn::Sigmoid>());
    }
    h = th;
    w = tw;
    in = out;
  }
  encoder_.set_name_prefix("encoder");
  decoder_.set_name_prefix("decoder");
}

Tensor ConvAutoencoder::forward(const Tensor& x, bool training) {
  if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != config_.input_height ||
      x.dim(3) != config_.input_width)
    throw ValidationError("ConvAE forward expects (N, 1, " + std::to_string(config_.input_height) +
                          ", " + std::to_string(config_.input_width) + ")");
  return decoder_.forward(encoder_.forward(x, training), training);
}

void ConvAutoencoder::backward(const Tensor& grad_out) {
  encoder_.backward(decoder_.backward(grad_out));
}

Tensor ConvAutoencoder::encode_pooled(const Tensor& x) {
  const Tensor bottleneck = encoder_.forward(x, /*training=*/false);
  const std::int64_t n = bottleneck.dim(0), c = bottleneck.dim(1);
  const std::int64_t spatial = bottleneck.dim(2) * bottleneck.dim(3);
  Tensor pooled({n, c});
  for (std::int64_t i = 0; i < n * c; ++i) {
    const double* p = bottleneck.data() + i * spatial;
    double acc = 0.0;
    for (std::int64_t q = 0; q < spatial; ++q) acc += p[q];
    pooled[i] = acc / static_cast<double>(spatial);
  }
  return pooled;
}

std::vector<nn::Param*> ConvAutoencoder::params() {
  std::vector<nn::Param*> out;
  encoder_.collect_params(out);
  decoder_.collect_params(out);
  return out;
}

void ConvAutoencoder::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
  encoder_.collect_buffers(out);
  decoder_.collect_buffers(out);
}

}  // namespace shearo::models
