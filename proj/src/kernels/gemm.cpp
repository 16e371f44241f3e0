#include "shearo/kernels/gemm.hpp"

#include <algorithm>
#include <vector>

namespace shearo::kernels {

namespace ref {

void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta) {
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = beta * c[i * n + j] + acc;
    }
  }
}

void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta) {
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = beta * c[i * n + j] + acc;
    }
  }
}

void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta) {
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = beta * c[i * n + j] + acc;
    }
  }
}

}  // namespace ref

namespace {

constexpr std::int64_t kBlockM = 64;
constexpr std::int64_t kBlockN = 256;
constexpr std::int64_t kBlockK = 256;

// mc x nc tile: 4x8 register micro-kernel, scalar edges.
inline void tile_nn(std::int64_t mc, std::int64_t nc, std::int64_t kk, const double* a,
                    std::int64_t lda, const double* b, std::int64_t ldb, double* c,
                    std::int64_t ldc) {
  for (std::int64_t i = 0; i < mc; i += 4) {
    const std::int64_t ib = std::min<std::int64_t>(4, mc - i);
    for (std::int64_t j = 0; j < nc; j += 8) {
      const std::int64_t jb = std::min<std::int64_t>(8, nc - j);
      if (ib == 4 && jb == 8) {
        double acc[4][8] = {};
        const double* ap = a + i * lda;
        const double* bp = b + j;
        for (std::int64_t p = 0; p < kk; ++p) {
          const double* brow = bp + p * ldb;
          for (int ii = 0; ii < 4; ++ii) {
            const double av = ap[ii * lda + p];
            for (int jj = 0; jj < 8; ++jj) acc[ii][jj] += av * brow[jj];
          }
        }
        for (int ii = 0; ii < 4; ++ii)
          for (int jj = 0; jj < 8; ++jj) c[(i + ii) * ldc + j + jj] += acc[ii][jj];
      } else {
        for (std::int64_t ii = 0; ii < ib; ++ii) {
          for (std::int64_t p = 0; p < kk; ++p) {
            const double av = a[(i + ii) * lda + p];
            const double* brow = b + p * ldb + j;
            double* crow = c + (i + ii) * ldc + j;
            for (std::int64_t jj = 0; jj < jb; ++jj) crow[jj] += av * brow[jj];
          }
        }
      }
    }
  }
}

void scale_c(std::int64_t m, std::int64_t n, double* c, double beta) {
  if (beta == 1.0) return;
  const std::int64_t total = m * n;
  if (beta == 0.0) {
    std::fill(c, c + total, 0.0);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < total; ++i) c[i] *= beta;
}

void gemm_nn_core(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
                  double* c) {
  for (std::int64_t jc = 0; jc < n; jc += kBlockN) {
    const std::int64_t nc = std::min(kBlockN, n - jc);
    for (std::int64_t kc = 0; kc < k; kc += kBlockK) {
      const std::int64_t kk = std::min(kBlockK, k - kc);
#pragma omp parallel for schedule(static)
      for (std::int64_t ic = 0; ic < m; ic += kBlockM) {
        const std::int64_t mc = std::min(kBlockM, m - ic);
        tile_nn(mc, nc, kk, a + ic * k + kc, k, b + kc * n + jc, n, c + ic * n + jc, n);
      }
    }
  }
}

std::vector<double> transpose(std::int64_t rows, std::int64_t cols, const double* src) {
  std::vector<double> out(static_cast<std::size_t>(rows * cols));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) out[static_cast<std::size_t>(j * rows + i)] = src[i * cols + j];
  return out;
}

}  // namespace

void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta) {
  scale_c(m, n, c, beta);
  gemm_nn_core(m, n, k, a, b, c);
}

void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta) {
  // B is (n, k); materialize B^T once, the transpose is O(nk) vs O(mnk) math.
  const std::vector<double> bt = transpose(n, k, b);
  scale_c(m, n, c, beta);
  gemm_nn_core(m, n, k, a, bt.data(), c);
}

void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta) {
  const std::vector<double> at = transpose(k, m, a);
  scale_c(m, n, c, beta);
  gemm_nn_core(m, n, k, at.data(), b, c);
}

}  // namespace shearo::kernels
