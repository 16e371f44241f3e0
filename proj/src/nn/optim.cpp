#include "shearo/nn/optim.hpp"

#include <cmath>

namespace shearo::nn {

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2, double eps)
    : Optimizer(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Param* p : params_) {
    m_.push_back(Tensor::zeros_like(p->value));
    v_.push_back(Tensor::zeros_like(p->value));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& value = params_[i]->value;
    const Tensor& grad = params_[i]->grad;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < value.numel(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * grad[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * grad[j] * grad[j];
      value[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
    }
  }
}

SgdMomentum::SgdMomentum(std::vector<Param*> params, double lr, double momentum,
                         double weight_decay)
    : Optimizer(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  for (Param* p : params_) velocity_.push_back(Tensor::zeros_like(p->value));
}

void SgdMomentum::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& value = params_[i]->value;
    const Tensor& grad = params_[i]->grad;
    Tensor& vel = velocity_[i];
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < value.numel(); ++j) {
      const double g = grad[j] + weight_decay_ * value[j];
      vel[j] = momentum_ * vel[j] + g;
      value[j] -= lr_ * vel[j];
    }
  }
}

}  // namespace shearo::nn
