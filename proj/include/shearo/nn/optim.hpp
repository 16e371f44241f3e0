#pragma once

#include <vector>

#include "shearo/nn/layers.hpp"

namespace shearo::nn {

class Optimizer {
 public:
  explicit Optimizer(std::vector<Param*> params) : params_(std::move(params)) {}
  virtual ~Optimizer() = default;
  virtual void step() = 0;
  void zero_grad() {
    for (Param* p : params_) p->zero_grad();
  }

 protected:
  std::vector<Param*> params_;
};

/// Adaptive-moment gradient descent with bias correction.
class Adam : public Optimizer {
 public:
  Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step() override;

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Momentum gradient descent with optional L2 weight decay.
class SgdMomentum : public Optimizer {
 public:
  SgdMomentum(std::vector<Param*> params, double lr, double momentum = 0.9,
              double weight_decay = 0.0);
  void step() override;

 private:
  double lr_, momentum_, weight_decay_;
  std::vector<Tensor> velocity_;
};

}  // namespace shearo::nn
