#include "shearo/nn/layers.hpp"

#include <cmath>

#include "shearo/core/error.hpp"
#include "shearo/kernels/conv.hpp"
#include "shearo/kernels/gemm.hpp"

namespace shearo::nn {

namespace {

void uniform_init(Tensor& t, double bound, Rng& rng) {
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
}

void require(bool cond, const char* msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace

// --- Linear ------------------------------------------------------------------

Linear::Linear(std::int64_t in_features, std::int64_t out_features, Rng& rng)
    : weight("weight", Tensor({out_features, in_features})),
      bias("bias", Tensor({out_features})) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in_features));
  uniform_init(weight.value, bound, rng);
  uniform_init(bias.value, bound, rng);
}

Tensor Linear::forward(const Tensor& x, bool) {
  require(x.ndim() == 2 && x.dim(1) == weight.value.dim(1), "Linear: input shape mismatch");
  input_ = x;
  const std::int64_t n = x.dim(0), out = weight.value.dim(0), in = weight.value.dim(1);
  Tensor y({n, out});
  kernels::gemm_nt(n, out, in, x.data(), weight.value.data(), y.data());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < out; ++j) y.at2(i, j) += bias.value[j];
  return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const std::int64_t n = input_.dim(0), out = weight.value.dim(0), in = weight.value.dim(1);
  require(grad_out.ndim() == 2 && grad_out.dim(0) == n && grad_out.dim(1) == out,
          "Linear: gradient shape mismatch");
  kernels::gemm_tn(out, in, n, grad_out.data(), input_.data(), weight.grad.data(), 1.0);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < out; ++j) bias.grad[j] += grad_out.at2(i, j);
  Tensor dx({n, in});
  kernels::gemm_nn(n, in, out, grad_out.data(), weight.value.data(), dx.data());
  return dx;
}

void Linear::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

void Linear::set_name_prefix(const std::string& prefix) {
  weight.name = prefix + ".weight";
  bias.name = prefix + ".bias";
}

// --- Conv2d ------------------------------------------------------------------

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor* bias,
                      std::int64_t stride, std::int64_t pad) {
  require(x.ndim() == 4 && weight.ndim() == 4 && x.dim(1) == weight.dim(1),
          "conv2d: input/weight shape mismatch");
  const std::int64_t n = x.dim(0), c_out = weight.dim(0);
  kernels::ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), weight.dim(2), weight.dim(3), stride, pad};
  const std::int64_t oh = g.out_h(), ow = g.out_w(), spatial = oh * ow;
  require(oh > 0 && ow > 0, "conv2d: output would be empty");

  Tensor y({n, c_out, oh, ow});
  std::vector<double> cols(static_cast<std::size_t>(g.patch_len() * spatial));
  for (std::int64_t s = 0; s < n; ++s) {
    kernels::im2col(g, x.data() + s * g.in_channels * g.in_h * g.in_w, cols.data());
    kernels::gemm_nn(c_out, spatial, g.patch_len(), weight.data(), cols.data(),
                     y.data() + s * c_out * spatial);
  }
  if (bias) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n * c_out; ++i) {
      const std::int64_t oc = i % c_out;
      double* row = y.data() + i * spatial;
      for (std::int64_t p = 0; p < spatial; ++p) row[p] += (*bias)[oc];
    }
  }
  return y;
}

Conv2d::Conv2d(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel,
               std::int64_t stride, std::int64_t pad, Rng& rng, bool with_bias)
    : weight("weight", Tensor({out_channels, in_channels, kernel, kernel})),
      bias("bias", Tensor({out_channels})),
      has_bias(with_bias),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in_channels * kernel * kernel));
  uniform_init(weight.value, bound, rng);
  if (with_bias) uniform_init(bias.value, bound, rng);
}

Tensor Conv2d::forward(const Tensor& x, bool) {
  input_ = x;
  return conv2d_forward(x, weight.value, has_bias ? &bias.value : nullptr, stride_, pad_);
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const std::int64_t n = input_.dim(0);
  kernels::ConvGeometry g{in_channels_, input_.dim(2), input_.dim(3), kernel_, kernel_, stride_,
                          pad_};
  const std::int64_t spatial = g.out_h() * g.out_w();
  require(grad_out.ndim() == 4 && grad_out.dim(0) == n && grad_out.dim(1) == out_channels_ &&
              grad_out.dim(2) == g.out_h() && grad_out.dim(3) == g.out_w(),
          "conv2d: gradient shape mismatch");

  Tensor dx({n, in_channels_, g.in_h, g.in_w});
  std::vector<double> cols(static_cast<std::size_t>(g.patch_len() * spatial));
  std::vector<double> dcols(cols.size());
  for (std::int64_t s = 0; s < n; ++s) {
    const double* x_s = input_.data() + s * in_channels_ * g.in_h * g.in_w;
    const double* dy_s = grad_out.data() + s * out_channels_ * spatial;
    kernels::im2col(g, x_s, cols.data());
    kernels::gemm_nt(out_channels_, g.patch_len(), spatial, dy_s, cols.data(), weight.grad.data(),
                     1.0);
    kernels::gemm_tn(g.patch_len(), spatial, out_channels_, weight.value.data(), dy_s,
                     dcols.data());
    kernels::col2im(g, dcols.data(), dx.data() + s * in_channels_ * g.in_h * g.in_w);
    if (has_bias) {
      for (std::int64_t oc = 0; oc < out_channels_; ++oc) {
        double acc = 0.0;
        for (std::int64_t p = 0; p < spatial; ++p) acc += dy_s[oc * spatial + p];
        bias.grad[oc] += acc;
      }
    }
  }
  return dx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias);
}

void Conv2d::set_name_prefix(const std::string& prefix) {
  weight.name = prefix + ".weight";
  bias.name = prefix + ".bias";
}

// --- ConvTranspose2d ----------------------------------------------------------

ConvTranspose2d::ConvTranspose2d(std::int64_t in_channels, std::int64_t out_channels,
                                 std::int64_t kernel, std::int64_t stride, std::int64_t pad,
                                 std::int64_t output_padding_h, std::int64_t output_padding_w,
                                 Rng& rng)
    : weight("weight", Tensor({in_channels, out_channels, kernel, kernel})),
      bias("bias", Tensor({out_channels})),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      output_padding_h_(output_padding_h),
      output_padding_w_(output_padding_w) {
  require(output_padding_h >= 0 && output_padding_h < stride && output_padding_w >= 0 &&
              output_padding_w < stride,
          "conv_transpose2d: output_padding must lie in [0, stride)");
  const double bound = std::sqrt(1.0 / static_cast<double>(in_channels * kernel * kernel));
  uniform_init(weight.value, bound, rng);
  uniform_init(bias.value, bound, rng);
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool) {
  require(x.ndim() == 4 && x.dim(1) == in_channels_, "conv_transpose2d: input shape mismatch");
  input_ = x;
  const std::int64_t n = x.dim(0), h_in = x.dim(2), w_in = x.dim(3);
  const std::int64_t h_out = (h_in - 1) * stride_ - 2 * pad_ + kernel_ + output_padding_h_;
  const std::int64_t w_out = (w_in - 1) * stride_ - 2 * pad_ + kernel_ + output_padding_w_;
  require(h_out > 0 && w_out > 0, "conv_transpose2d: output would be empty");
  kernels::ConvGeometry g{out_channels_, h_out, w_out, kernel_, kernel_, stride_, pad_};
  require(g.out_h() == h_in && g.out_w() == w_in, "conv_transpose2d: inconsistent geometry");

  const std::int64_t p = h_in * w_in;
  const std::int64_t opatch = out_channels_ * kernel_ * kernel_;
  Tensor y({n, out_channels_, h_out, w_out});
  std::vector<double> cols(static_cast<std::size_t>(opatch * p));
  for (std::int64_t s = 0; s < n; ++s) {
    kernels::gemm_tn(opatch, p, in_channels_, weight.value.data(), x.data() + s * in_channels_ * p,
                     cols.data());
    kernels::col2im(g, cols.data(), y.data() + s * out_channels_ * h_out * w_out);
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n * out_channels_; ++i) {
    const std::int64_t oc = i % out_channels_;
    double* row = y.data() + i * h_out * w_out;
    for (std::int64_t q = 0; q < h_out * w_out; ++q) row[q] += bias.value[oc];
  }
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out) {
  const std::int64_t n = input_.dim(0), h_in = input_.dim(2), w_in = input_.dim(3);
  const std::int64_t h_out = grad_out.dim(2), w_out = grad_out.dim(3);
  kernels::ConvGeometry g{out_channels_, h_out, w_out, kernel_, kernel_, stride_, pad_};
  require(grad_out.dim(0) == n && grad_out.dim(1) == out_channels_ && g.out_h() == h_in &&
              g.out_w() == w_in,
          "conv_transpose2d: gradient shape mismatch");

  const std::int64_t p = h_in * w_in;
  const std::int64_t opatch = out_channels_ * kernel_ * kernel_;
  Tensor dx({n, in_channels_, h_in, w_in});
  std::vector<double> dcols(static_cast<std::size_t>(opatch * p));
  for (std::int64_t s = 0; s < n; ++s) {
    const double* dy_s = grad_out.data() + s * out_channels_ * h_out * w_out;
    kernels::im2col(g, dy_s, dcols.data());
    kernels::gemm_nn(in_channels_, p, opatch, weight.value.data(), dcols.data(),
                     dx.data() + s * in_channels_ * p);
    kernels::gemm_nt(in_channels_, opatch, p, input_.data() + s * in_channels_ * p, dcols.data(),
                     weight.grad.data(), 1.0);
    for (std::int64_t oc = 0; oc < out_channels_; ++oc) {
      double acc = 0.0;
      for (std::int64_t q = 0; q < h_out * w_out; ++q) acc += dy_s[oc * h_out * w_out + q];
      bias.grad[oc] += acc;
    }
  }
  return dx;
}

void ConvTranspose2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

void ConvTranspose2d::set_name_prefix(const std::string& prefix) {
  weight.name = prefix + ".weight";
  bias.name = prefix + ".bias";
}

// --- BatchNorm2d ---------------------------------------------------------------

BatchNorm2d::BatchNorm2d(std::int64_t channels, double momentum, double eps)
    : gamma("gamma", Tensor({channels}, 1.0)),
      beta("beta", Tensor({channels}, 0.0)),
      running_mean({channels}, 0.0),
      running_var({channels}, 1.0),
      channels_(channels),
      momentum_(momentum),
      eps_(eps) {}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  require(x.ndim() == 4 && x.dim(1) == channels_, "batchnorm: input shape mismatch");
  const std::int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::int64_t count = n * h * w;
  Tensor y = Tensor::zeros_like(x);
  trained_forward_ = training;

  if (training) {
    input_ = x;
    batch_mean_ = Tensor({channels_});
    batch_inv_std_ = Tensor({channels_});
    x_hat_ = Tensor::zeros_like(x);
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < channels_; ++c) {
      double mean = 0.0;
      for (std::int64_t s = 0; s < n; ++s) {
        const double* p = x.data() + (s * channels_ + c) * h * w;
        for (std::int64_t q = 0; q < h * w; ++q) mean += p[q];
      }
      mean /= static_cast<double>(count);
      double var = 0.0;
      for (std::int64_t s = 0; s < n; ++s) {
        const double* p = x.data() + (s * channels_ + c) * h * w;
        for (std::int64_t q = 0; q < h * w; ++q) var += (p[q] - mean) * (p[q] - mean);
      }
      var /= static_cast<double>(count);
      batch_mean_[c] = mean;
      const double inv_std = 1.0 / std::sqrt(var + eps_);
      batch_inv_std_[c] = inv_std;

      running_mean[c] = (1.0 - momentum_) * running_mean[c] + momentum_ * mean;
      const double unbiased =
          count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
      running_var[c] = (1.0 - momentum_) * running_var[c] + momentum_ * unbiased;

      for (std::int64_t s = 0; s < n; ++s) {
        const double* p = x.data() + (s * channels_ + c) * h * w;
        double* xh = x_hat_.data() + (s * channels_ + c) * h * w;
        double* yp = y.data() + (s * channels_ + c) * h * w;
        for (std::int64_t q = 0; q < h * w; ++q) {
          xh[q] = (p[q] - mean) * inv_std;
          yp[q] = gamma.value[c] * xh[q] + beta.value[c];
        }
      }
    }
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < channels_; ++c) {
      const double inv_std = 1.0 / std::sqrt(running_var[c] + eps_);
      for (std::int64_t s = 0; s < n; ++s) {
        const double* p = x.data() + (s * channels_ + c) * h * w;
        double* yp = y.data() + (s * channels_ + c) * h * w;
        for (std::int64_t q = 0; q < h * w; ++q)
          yp[q] = gamma.value[c] * (p[q] - running_mean[c]) * inv_std + beta.value[c];
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  const std::int64_t n = grad_out.dim(0), h = grad_out.dim(2), w = grad_out.dim(3);
  const std::int64_t count = n * h * w;
  Tensor dx = Tensor::zeros_like(grad_out);

  if (!trained_forward_) {
    // Eval-mode statistics are constants.
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < channels_; ++c) {
      const double scale = gamma.value[c] / std::sqrt(running_var[c] + eps_);
      for (std::int64_t s = 0; s < n; ++s) {
        const double* gp = grad_out.data() + (s * channels_ + c) * h * w;
        double* dp = dx.data() + (s * channels_ + c) * h * w;
        for (std::int64_t q = 0; q < h * w; ++q) dp[q] = gp[q] * scale;
      }
    }
    return dx;
  }

#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::int64_t s = 0; s < n; ++s) {
      const double* gp = grad_out.data() + (s * channels_ + c) * h * w;
      const double* xh = x_hat_.data() + (s * channels_ + c) * h * w;
      for (std::int64_t q = 0; q < h * w; ++q) {
        sum_dy += gp[q];
        sum_dy_xhat += gp[q] * xh[q];
      }
    }
    beta.grad[c] += sum_dy;
    gamma.grad[c] += sum_dy_xhat;
    const double scale = gamma.value[c] * batch_inv_std_[c] / static_cast<double>(count);
    for (std::int64_t s = 0; s < n; ++s) {
      const double* gp = grad_out.data() + (s * channels_ + c) * h * w;
      const double* xh = x_hat_.data() + (s * channels_ + c) * h * w;
      double* dp = dx.data() + (s * channels_ + c) * h * w;
      for (std::int64_t q = 0; q < h * w; ++q)
        dp[q] = scale * (static_cast<double>(count) * gp[q] - sum_dy - xh[q] * sum_dy_xhat);
    }
  }
  return dx;
}

void BatchNorm2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

void BatchNorm2d::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
  out.emplace_back(prefix_ + ".running_mean", &running_mean);
  out.emplace_back(prefix_ + ".running_var", &running_var);
}

void BatchNorm2d::set_name_prefix(const std::string& prefix) {
  prefix_ = prefix;
  gamma.name = prefix + ".gamma";
  beta.name = prefix + ".beta";
}

// --- activations ----------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool) {
  input_ = x;
  Tensor y = x;
  double* p = y.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < y.numel(); ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  double* p = dx.data();
  const double* x = input_.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < dx.numel(); ++i) p[i] = x[i] > 0.0 ? p[i] : 0.0;
  return dx;
}

Tensor LeakyReLU::forward(const Tensor& x, bool) {
  input_ = x;
  Tensor y = x;
  double* p = y.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < y.numel(); ++i) p[i] = p[i] > 0.0 ? p[i] : slope_ * p[i];
  return y;
}

Tensor LeakyReLU::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  double* p = dx.data();
  const double* x = input_.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < dx.numel(); ++i) p[i] = x[i] > 0.0 ? p[i] : slope_ * p[i];
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, bool) {
  Tensor y = x;
  double* p = y.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < y.numel(); ++i) p[i] = 1.0 / (1.0 + std::exp(-p[i]));
  output_ = y;
  return y;
}

Tensor Sigmoid::backward(const Tensor& grad_out) {
  Tensor dx = grad_out;
  double* p = dx.data();
  const double* y = output_.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < dx.numel(); ++i) p[i] *= y[i] * (1.0 - y[i]);
  return dx;
}

// --- Dropout ----------------------------------------------------------------------

Dropout::Dropout(double rate, Rng& rng) : rate_(rate), rng_(&rng) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout rate must lie in [0,1)");
}

Tensor Dropout::forward(const Tensor& x, bool training) {
  active_ = training && rate_ > 0.0;
  if (!active_) return x;
  mask_ = Tensor::zeros_like(x);
  const double keep = 1.0 - rate_;
  // Mask generation is sequential: the RNG stream defines the run.
  for (std::int64_t i = 0; i < mask_.numel(); ++i)
    mask_[i] = rng_->uniform() < keep ? 1.0 / keep : 0.0;
  Tensor y = x;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] *= mask_[i];
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (!active_) return grad_out;
  Tensor dx = grad_out;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < dx.numel(); ++i) dx[i] *= mask_[i];
  return dx;
}

// --- MaxPool2d ----------------------------------------------------------------------

MaxPool2d::MaxPool2d(std::int64_t kernel, std::int64_t stride, std::int64_t pad)
    : kernel_(kernel), stride_(stride), pad_(pad) {}

Tensor MaxPool2d::forward(const Tensor& x, bool) {
  require(x.ndim() == 4, "maxpool: expects (N,C,H,W)");
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t oh = (h + 2 * pad_ - kernel_) / stride_ + 1;
  const std::int64_t ow = (w + 2 * pad_ - kernel_) / stride_ + 1;
  require(oh > 0 && ow > 0, "maxpool: output would be empty");
  in_shape_ = {n, c, h, w};
  Tensor y({n, c, oh, ow});
  argmax_.assign(static_cast<std::size_t>(y.numel()), 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t plane = 0; plane < n * c; ++plane) {
    const double* src = x.data() + plane * h * w;
    double* dst = y.data() + plane * oh * ow;
    std::int64_t* arg = argmax_.data() + plane * oh * ow;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        double best = -1e300;
        std::int64_t best_idx = -1;
        for (std::int64_t ky = 0; ky < kernel_; ++ky) {
          const std::int64_t iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= h) continue;
          for (std::int64_t kx = 0; kx < kernel_; ++kx) {
            const std::int64_t ix = ox * stride_ - pad_ + kx;
            if (ix < 0 || ix >= w) continue;
            const double v = src[iy * w + ix];
            if (v > best) {
              best = v;
              best_idx = iy * w + ix;
            }
          }
        }
        dst[oy * ow + ox] = best;
        arg[oy * ow + ox] = best_idx;
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
  Tensor dx(in_shape_);
  const std::int64_t planes = in_shape_[0] * in_shape_[1];
  const std::int64_t plane_in = in_shape_[2] * in_shape_[3];
  const std::int64_t plane_out = grad_out.dim(2) * grad_out.dim(3);
#pragma omp parallel for schedule(static)
  for (std::int64_t plane = 0; plane < planes; ++plane) {
    double* dst = dx.data() + plane * plane_in;
    const double* gp = grad_out.data() + plane * plane_out;
    const std::int64_t* arg = argmax_.data() + plane * plane_out;
    for (std::int64_t q = 0; q < plane_out; ++q)
      if (arg[q] >= 0) dst[arg[q]] += gp[q];
  }
  return dx;
}

// --- Sequential ----------------------------------------------------------------------

Tensor Sequential::forward(const Tensor& x, bool training) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h, training);
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::collect_params(std::vector<Param*>& out) {
  for (auto& l : layers_) l->collect_params(out);
}

void Sequential::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
  for (auto& l : layers_) l->collect_buffers(out);
}

void Sequential::set_name_prefix(const std::string& prefix) {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->set_name_prefix(prefix + "." + std::to_string(i));
}

}  // namespace shearo::nn
