#include "shearo/nn/backbone.hpp"

#include "shearo/core/error.hpp"

namespace shearo::nn {

void BackboneConfig::validate() const {
  if (in_channels < 1 || base_channels < 1)
    throw ValidationError("backbone channels must be positive");
  if (blocks_per_stage.empty() || blocks_per_stage.size() > 4)
    throw ValidationError("backbone needs 1..4 stages");
  for (auto b : blocks_per_stage)
    if (b < 1) throw ValidationError("each stage needs at least one block");
  if (stem_kernel < 1 || stem_kernel % 2 == 0 || stem_stride < 1)
    throw ValidationError("invalid stem geometry");
}

BasicBlock::BasicBlock(std::int64_t in_channels, std::int64_t out_channels, std::int64_t stride,
                       Rng& rng)
    : conv1_(in_channels, out_channels, 3, stride, 1, rng, /*with_bias=*/false),
      bn1_(out_channels),
      conv2_(out_channels, out_channels, 3, 1, 1, rng, /*with_bias=*/false),
      bn2_(out_channels) {
  if (stride != 1 || in_channels != out_channels) {
    down_conv_ = std::make_unique<Conv2d>(in_channels, out_channels, 1, stride, 0, rng,
                                          /*with_bias=*/false);
    down_bn_ = std::make_unique<BatchNorm2d>(out_channels);
  }
}

Tensor BasicBlock::forward(const Tensor& x, bool training) {
  Tensor main = bn2_.forward(
      conv2_.forward(relu1_.forward(bn1_.forward(conv1_.forward(x, training), training), training),
                     training),
      training);
  Tensor shortcut =
      down_conv_ ? down_bn_->forward(down_conv_->forward(x, training), training) : x;
  sum_ = main;
  double* s = sum_.data();
  const double* sc = shortcut.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < sum_.numel(); ++i) s[i] += sc[i];

  Tensor y = sum_;
  double* p = y.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < y.numel(); ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
  return y;
}

Tensor BasicBlock::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  double* gp = g.data();
  const double* s = sum_.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < g.numel(); ++i) gp[i] = s[i] > 0.0 ? gp[i] : 0.0;

  Tensor dx_main = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(g)))));
  Tensor dx_short = down_conv_ ? down_conv_->backward(down_bn_->backward(g)) : g;
  double* dm = dx_main.data();
  const double* ds = dx_short.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < dx_main.numel(); ++i) dm[i] += ds[i];
  return dx_main;
}

void BasicBlock::collect_params(std::vector<Param*>& out) {
  conv1_.collect_params(out);
  bn1_.collect_params(out);
  conv2_.collect_params(out);
  bn2_.collect_params(out);
  if (down_conv_) {
    down_conv_->collect_params(out);
    down_bn_->collect_params(out);
  }
}

void BasicBlock::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
  bn1_.collect_buffers(out);
  bn2_.collect_buffers(out);
  if (down_bn_) down_bn_->collect_buffers(out);
}

void BasicBlock::set_name_prefix(const std::string& prefix) {
  conv1_.set_name_prefix(prefix + ".conv1");
  bn1_.set_name_prefix(prefix + ".bn1");
  conv2_.set_name_prefix(prefix + ".conv2");
  bn2_.set_name_prefix(prefix + ".bn2");
  if (down_conv_) {
    down_conv_->set_name_prefix(prefix + ".down_conv");
    down_bn_->set_name_prefix(prefix + ".down_bn");
  }
}

Backbone::Backbone(const BackboneConfig& config, Rng& rng) : config_(config) {
  config.validate();
  stem_.add(std::make_unique<Conv2d>(config.in_channels, config.base_channels, config.stem_kernel,
                                     config.stem_stride, config.stem_kernel / 2, rng,
                                     /*with_bias=*/false));
  stem_.add(std::make_unique<BatchNorm2d>(config.base_channels));
  stem_.add(std::make_unique<ReLU>());
  if (config.stem_pool) stem_.add(std::make_unique<MaxPool2d>(3, 2, 1));
  stem_.set_name_prefix("stem");

  std::int64_t channels = config.base_channels;
  for (std::int64_t stage = 0; stage < config.num_stages(); ++stage) {
    const std::int64_t out_channels = config.stage_channels(stage);
    Sequential seq;
    for (std::int64_t b = 0; b < config.blocks_per_stage[static_cast<std::size_t>(stage)]; ++b) {
      // Stage 1 keeps the stem resolution; later stages downsample on entry.
      const std::int64_t stride = (b == 0 && stage > 0) ? 2 : 1;
      seq.add(std::make_unique<BasicBlock>(b == 0 ? channels : out_channels, out_channels, stride,
                                           rng));
    }
    seq.set_name_prefix("stage" + std::to_string(stage + 1));
    stages_.push_back(std::move(seq));
    channels = out_channels;
  }
}

std::vector<Tensor> Backbone::forward(const Tensor& x, bool training) {
  stage_outputs_.clear();
  Tensor h = stem_.forward(x, training);
  for (auto& stage : stages_) {
    h = stage.forward(h, training);
    stage_outputs_.push_back(h);
  }
  return stage_outputs_;
}

Tensor Backbone::backward(const std::vector<Tensor>& stage_grads) {
  if (stage_grads.size() != stages_.size())
    throw ValidationError("backbone backward expects one gradient per stage");
  Tensor g;
  for (std::size_t si = stages_.size(); si-- > 0;) {
    Tensor total = stage_grads[si];
    if (si + 1 < stages_.size()) {
      double* tp = total.data();
      const double* gp = g.data();
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < total.numel(); ++i) tp[i] += gp[i];
    }
    g = stages_[si].backward(total);
  }
  return stem_.backward(g);
}

void Backbone::collect_params(std::vector<Param*>& out) {
  stem_.collect_params(out);
  for (auto& s : stages_) s.collect_params(out);
}

void Backbone::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
  stem_.collect_buffers(out);
  for (auto& s : stages_) s.collect_buffers(out);
}

std::vector<Param*> Backbone::params() {
  std::vector<Param*> out;
  collect_params(out);
  return out;
}

void Backbone::zero_grad() {
  for (Param* p : params()) p->zero_grad();
}

void Backbone::copy_state_from(const Backbone& other) {
  if (!(config_ == other.config_)) throw ValidationError("backbone topology mismatch in copy");
  auto* self = const_cast<Backbone*>(this);
  auto* src = const_cast<Backbone*>(&other);
  std::vector<Param*> dst_params = self->params();
  std::vector<Param*> src_params = src->params();
  for (std::size_t i = 0; i < dst_params.size(); ++i)
    dst_params[i]->value = src_params[i]->value;
  std::vector<std::pair<std::string, Tensor*>> dst_buf, src_buf;
  self->collect_buffers(dst_buf);
  src->collect_buffers(src_buf);
  for (std::size_t i = 0; i < dst_buf.size(); ++i) *dst_buf[i].second = *src_buf[i].second;
}

}  // namespace shearo::nn
