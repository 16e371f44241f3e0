#pragma once

#include <cstdint>

namespace shearo::kernels {

/// Serial reference kernels. Plain triple loops, kept for correctness tests
/// and the kernel benchmark.
namespace ref {
// C[M,N] = A[M,K] * B[K,N] + beta * C
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta = 0.0);
// C[M,N] = A[M,K] * B[N,K]^T + beta * C
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta = 0.0);
// C[M,N] = A[K,M]^T * B[K,N] + beta * C
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta = 0.0);
}  // namespace ref

/// Blocked OpenMP kernels. Each output element is accumulated by exactly one
/// thread in a fixed k-order, so results are identical for any thread count.
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta = 0.0);
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta = 0.0);
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c, double beta = 0.0);

}  // namespace shearo::kernels
