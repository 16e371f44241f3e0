#include "shearo/eval/tsne.hpp"

#include <algorithm>
#include <cmath>

#include "shearo/core/error.hpp"
#include "shearo/core/rng.hpp"

namespace shearo::eval {

namespace {

constexpr double kTinyProb = 1e-12;

Tensor squared_distances(const Tensor& x) {
  const std::int64_t n = x.dim(0), d = x.dim(1);
  Tensor d2({n, n});
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < d; ++k) {
        const double diff = x.at2(i, k) - x.at2(j, k);
        acc += diff * diff;
      }
      d2.at2(i, j) = acc;
    }
  }
  return d2;
}

/// Conditional distribution p_{j|i} for one row at the given precision.
/// Returns the perplexity exp(H).
double row_conditional(const Tensor& d2, std::int64_t i, double beta, std::vector<double>& p) {
  const std::int64_t n = d2.dim(0);
  double sum = 0.0;
  for (std::int64_t j = 0; j < n; ++j) {
    p[static_cast<std::size_t>(j)] = j == i ? 0.0 : std::exp(-beta * d2.at2(i, j));
    sum += p[static_cast<std::size_t>(j)];
  }
  if (sum <= 0.0) {
    // Degenerate row (all distances huge). Fall back to uniform.
    for (std::int64_t j = 0; j < n; ++j) p[static_cast<std::size_t>(j)] = j == i ? 0.0 : 1.0;
    sum = static_cast<double>(n - 1);
  }
  double entropy = 0.0;
  for (std::int64_t j = 0; j < n; ++j) {
    double& v = p[static_cast<std::size_t>(j)];
    v /= sum;
    if (v > 0.0) entropy -= v * std::log(v);
  }
  return std::exp(entropy);
}

}  // namespace

void TsneOptions::validate() const {
  if (!(perplexity > 0.0)) throw ValidationError("tsne: perplexity must be positive");
  if (iterations < 1 || exaggeration_iterations < 0)
    throw ValidationError("tsne: invalid iteration counts");
  if (!(learning_rate > 0.0) || !(exaggeration >= 1.0))
    throw ValidationError("tsne: invalid optimizer parameters");
}

Tensor joint_affinities(const Tensor& features, double perplexity) {
  if (features.ndim() != 2) throw ValidationError("tsne expects (N, D) features");
  const std::int64_t n = features.dim(0);
  if (static_cast<double>(n) <= 3.0 * perplexity)
    throw ValidationError("tsne: sample count must exceed 3 * perplexity");

  const Tensor d2 = squared_distances(features);
  Tensor conditional({n, n});
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<double> p(static_cast<std::size_t>(n));
    double beta = 1.0, beta_lo = 0.0, beta_hi = 1e300;
    for (int iter = 0; iter < 200; ++iter) {
      const double perp = row_conditional(d2, i, beta, p);
      if (std::abs(perp - perplexity) < 1e-4) break;
      if (perp > perplexity) {
        beta_lo = beta;
        beta = beta_hi >= 1e300 ? beta * 2.0 : 0.5 * (beta + beta_hi);
      } else {
        beta_hi = beta;
        beta = beta_lo <= 0.0 ? beta * 0.5 : 0.5 * (beta + beta_lo);
      }
    }
    (void)row_conditional(d2, i, beta, p);
    for (std::int64_t j = 0; j < n; ++j) conditional.at2(i, j) = p[static_cast<std::size_t>(j)];
  }

  Tensor joint({n, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      joint.at2(i, j) = (conditional.at2(i, j) + conditional.at2(j, i)) / (2.0 * static_cast<double>(n));
  return joint;
}

EmbeddingResult tsne(const Tensor& features, const TsneOptions& options) {
  options.validate();
  const Tensor p = joint_affinities(features, options.perplexity);
  const std::int64_t n = features.dim(0);

  Rng rng(options.seed);
  Tensor y({n, 2});
  for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = rng.normal(0.0, 1e-2);

  Tensor velocity({n, 2});
  Tensor gains({n, 2}, 1.0);
  Tensor q_num({n, n});

  auto compute_q = [&](const Tensor& coords) {
    double z = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        if (i == j) {
          q_num.at2(i, j) = 0.0;
          continue;
        }
        const double dx = coords.at2(i, 0) - coords.at2(j, 0);
        const double dy = coords.at2(i, 1) - coords.at2(j, 1);
        q_num.at2(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
        z += q_num.at2(i, j);
      }
    }
    return z;
  };

  auto kl_of = [&](const Tensor& coords, double exaggeration) {
    const double z = compute_q(coords);
    double kl = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double pij = std::max(kTinyProb, exaggeration * p.at2(i, j));
        const double qij = std::max(kTinyProb, q_num.at2(i, j) / z);
        kl += pij * std::log(pij / qij);
      }
    }
    return kl;
  };

  EmbeddingResult result;
  double step_scale = 1.0;
  double prev_kl = 1e300;

  for (int iter = 0; iter < options.iterations; ++iter) {
    const bool exaggerated = iter < options.exaggeration_iterations;
    const double ex = exaggerated ? options.exaggeration : 1.0;
    const double momentum = exaggerated ? 0.5 : 0.8;

    const double z = compute_q(y);
    Tensor grad({n, 2});
    for (std::int64_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::int64_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double pij = ex * p.at2(i, j);
        const double qij = q_num.at2(i, j) / z;
        const double mult = 4.0 * (pij - qij) * q_num.at2(i, j);
        gx += mult * (y.at2(i, 0) - y.at2(j, 0));
        gy += mult * (y.at2(i, 1) - y.at2(j, 1));
      }
      grad.at2(i, 0) = gx;
      grad.at2(i, 1) = gy;
    }

    auto apply_step = [&](double scale) {
      Tensor next = y;
      for (std::int64_t k = 0; k < n * 2; ++k) {
        const bool same_sign = (grad[k] > 0.0) == (velocity[k] > 0.0);
        gains[k] = std::max(0.01, same_sign ? gains[k] * 0.8 : gains[k] + 0.2);
        velocity[k] = momentum * velocity[k] - scale * options.learning_rate * gains[k] * grad[k];
        next[k] = y[k] + velocity[k];
      }
      return next;
    };

    if (exaggerated) {
      y = apply_step(step_scale);
      result.kl_trace.push_back(kl_of(y, ex));
      prev_kl = 1e300;  // baseline resets when exaggeration ends
      continue;
    }

    // Plain-phase step control: reject steps that raise the divergence so
    // the recorded trace stays non-increasing.
    const Tensor saved_velocity = velocity;
    const Tensor saved_gains = gains;
    bool accepted = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      const Tensor candidate = apply_step(step_scale);
      const double kl = kl_of(candidate, 1.0);
      if (kl <= prev_kl + 1e-9) {
        y = candidate;
        prev_kl = std::min(prev_kl, kl);
        result.kl_trace.push_back(kl);
        step_scale = std::min(1.0, step_scale * 1.2);
        accepted = true;
        break;
      }
      velocity = saved_velocity;
      gains = saved_gains;
      for (std::int64_t k = 0; k < n * 2; ++k) velocity[k] *= 0.5;  // damp momentum
      step_scale *= 0.5;
    }
    if (!accepted) {
      // Converged to machine precision; freeze the remaining trace.
      velocity.fill(0.0);
      result.kl_trace.push_back(prev_kl);
    }
  }

  result.coords = y;
  result.kl_final = result.kl_trace.empty() ? 0.0 : result.kl_trace.back();
  return result;
}

}  // namespace shearo::eval
