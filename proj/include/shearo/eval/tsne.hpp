#pragma once

#include <cstdint>
#include <vector>

#include "shearo/core/tensor.hpp"

namespace shearo::eval {

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  int exaggeration_iterations = 250;
  double exaggeration = 12.0;
  double learning_rate = 200.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EmbeddingResult {
  Tensor coords;                 // (N, 2)
  std::vector<double> kl_trace;  // one accepted KL value per iteration
  double kl_final = 0.0;
};

/// Exact (non-approximated) t-SNE: per-point Gaussian bandwidths found by
/// bisection to match the perplexity within 1e-4, symmetrized and
/// normalized affinities, 2-D embedding by gradient descent on the KL
/// divergence with early exaggeration. After the exaggeration phase the
/// step control rejects KL increases, so the recorded trace is
/// non-increasing from there on. Deterministic given the seed.
EmbeddingResult tsne(const Tensor& features, const TsneOptions& options);

/// Symmetrized, normalized joint affinities (exposed for tests).
Tensor joint_affinities(const Tensor& features, double perplexity);

}  // namespace shearo::eval
