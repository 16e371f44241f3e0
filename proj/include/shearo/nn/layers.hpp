#pragma once

#include <memory>
#include <string>
#include <vector>

#include "shearo/core/rng.hpp"
#include "shearo/core/tensor.hpp"

namespace shearo::nn {

/// Trainable tensor plus its gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  explicit Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::zeros_like(value);
  }
  void zero_grad() { grad.fill(0.0); }
};

/// One network stage with explicit forward/backward. A layer caches whatever
/// its backward pass needs, so forward/backward pairs must not interleave on
/// the same instance.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool training) = 0;
  /// Accumulates parameter gradients and returns the gradient w.r.t. input.
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect_params(std::vector<Param*>& out) {}
  /// Non-trainable state that still belongs in checkpoints (batchnorm
  /// running statistics).
  virtual void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {}
  /// Prefixes parameter names, e.g. "encoder.0.weight".
  virtual void set_name_prefix(const std::string&) {}
};

/// y = x W^T + b with x (N, in), W (out, in).
class Linear : public Layer {
 public:
  Linear(std::int64_t in_features, std::int64_t out_features, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void set_name_prefix(const std::string& prefix) override;

  Param weight;
  Param bias;

 private:
  Tensor input_;
};

class Conv2d : public Layer {
 public:
  Conv2d(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel,
         std::int64_t stride, std::int64_t pad, Rng& rng, bool with_bias = true);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void set_name_prefix(const std::string& prefix) override;

  Param weight;  // (out, in, k, k)
  Param bias;    // (out); unused when with_bias is false
  bool has_bias;

 private:
  std::int64_t in_channels_, out_channels_, kernel_, stride_, pad_;
  Tensor input_;
};

/// Transposed convolution; weight layout (in, out, k, k). Per-axis
/// output_padding resolves the output-size ambiguity of strided
/// convolutions.
class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel,
                  std::int64_t stride, std::int64_t pad, std::int64_t output_padding_h,
                  std::int64_t output_padding_w, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void set_name_prefix(const std::string& prefix) override;

  Param weight;
  Param bias;

 private:
  std::int64_t in_channels_, out_channels_, kernel_, stride_, pad_;
  std::int64_t output_padding_h_, output_padding_w_;
  Tensor input_;
};

/// Per-channel batch normalization over (N, H, W). Batch statistics during
/// training, running statistics in eval mode.
class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(std::int64_t channels, double momentum = 0.1, double eps = 1e-5);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) override;
  void set_name_prefix(const std::string& prefix) override;

  Param gamma;
  Param beta;
  Tensor running_mean;  // updated in training, never differentiated
  Tensor running_var;

 private:
  std::int64_t channels_;
  double momentum_, eps_;
  std::string prefix_ = "bn";
  Tensor input_, x_hat_, batch_mean_, batch_inv_std_;
  bool trained_forward_ = false;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor input_;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(double slope = 0.01) : slope_(slope) {}
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  double slope_;
  Tensor input_;
};

class Sigmoid : public Layer {
 public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor output_;
};

/// Inverted dropout driven by the owning model's RNG; identity in eval mode.
class Dropout : public Layer {
 public:
  Dropout(double rate, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  double rate_;
  Rng* rng_;
  Tensor mask_;
  bool active_ = false;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(std::int64_t kernel, std::int64_t stride, std::int64_t pad);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::int64_t kernel_, stride_, pad_;
  std::vector<std::int64_t> argmax_;
  std::vector<std::int64_t> in_shape_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) override;
  void set_name_prefix(const std::string& prefix) override;
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Batched conv primitives shared by Conv2d/ConvTranspose2d and the tests.
Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor* bias,
                      std::int64_t stride, std::int64_t pad);

}  // namespace shearo::nn
