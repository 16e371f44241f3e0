#pragma once

#include "shearo/core/tensor.hpp"

namespace shearo::kernels {

/// Bilinear resample of a (H,W) map to (out_h, out_w). Half-pixel centers,
/// edge clamp; resizing to the same shape is the identity.
Tensor bilinear_resize(const Tensor& src, std::int64_t out_h, std::int64_t out_w);

namespace ref {
Tensor bilinear_resize(const Tensor& src, std::int64_t out_h, std::int64_t out_w);
}

}  // namespace shearo::kernels
