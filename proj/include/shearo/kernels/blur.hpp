#pragma once

#include "shearo/core/tensor.hpp"

namespace shearo::kernels {

/// Separable Gaussian blur of a (H,W) map with symmetric-reflection borders.
/// Kernel radius ceil(3*sigma), normalized to unit mass.
Tensor gaussian_blur(const Tensor& src, double sigma);

namespace ref {
Tensor gaussian_blur(const Tensor& src, double sigma);
}

}  // namespace shearo::kernels
