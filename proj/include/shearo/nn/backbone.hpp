#pragma once

#include <memory>
#include <vector>

#include "shearo/nn/layers.hpp"

namespace shearo::nn {

/// 18-layer-style residual topology: conv stem, then stages of two-conv
/// basic blocks, channel width doubling per stage. Stage outputs form the
/// feature pyramid.
struct BackboneConfig {
  std::int64_t in_channels = 3;
  std::int64_t base_channels = 64;
  std::vector<std::int64_t> blocks_per_stage = {2, 2, 2};  // stages 1..3
  std::int64_t stem_kernel = 7;
  std::int64_t stem_stride = 2;
  bool stem_pool = true;  // 3x3 stride-2 max pool after the stem

  std::int64_t num_stages() const { return static_cast<std::int64_t>(blocks_per_stage.size()); }
  std::int64_t stage_channels(std::int64_t stage) const { return base_channels << stage; }
  void validate() const;
  bool operator==(const BackboneConfig&) const = default;
};

/// conv-bn-relu-conv-bn plus identity (or strided 1x1 conv-bn) shortcut.
class BasicBlock : public Layer {
 public:
  BasicBlock(std::int64_t in_channels, std::int64_t out_channels, std::int64_t stride, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) override;
  void set_name_prefix(const std::string& prefix) override;

 private:
  Conv2d conv1_;
  BatchNorm2d bn1_;
  ReLU relu1_;
  Conv2d conv2_;
  BatchNorm2d bn2_;
  std::unique_ptr<Conv2d> down_conv_;
  std::unique_ptr<BatchNorm2d> down_bn_;
  Tensor sum_;  // pre-activation of the output ReLU
};

class Backbone {
 public:
  Backbone(const BackboneConfig& config, Rng& rng);

  const BackboneConfig& config() const { return config_; }

  /// Stage outputs (the feature pyramid), shallowest first.
  std::vector<Tensor> forward(const Tensor& x, bool training);

  /// Backward from per-stage gradients (zero tensors allowed); returns the
  /// gradient w.r.t. the input.
  Tensor backward(const std::vector<Tensor>& stage_grads);

  void collect_params(std::vector<Param*>& out);
  void collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out);
  std::vector<Param*> params();
  void zero_grad();

  /// Copies parameter values and batchnorm running statistics.
  void copy_state_from(const Backbone& other);

 private:
  BackboneConfig config_;
  Sequential stem_;
  std::vector<Sequential> stages_;
  std::vector<Tensor> stage_outputs_;
};

}  // namespace shearo::nn
