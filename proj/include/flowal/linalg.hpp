#pragma once

#include <cstddef>

namespace flowal {

// Row-major GEMM kernels shared by the autodiff tape and the plain inference
// paths. Each output row is produced by exactly one thread with a fixed
// k-order, so results are bit-identical for any thread count.

// C[m,n] (+)= A[m,k] * B[k,n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             const double* A, const double* B, double* C, bool accumulate);

// C[m,n] (+)= A[m,k] * B[n,k]^T
void gemm_nt(std::size_t m, std::size_t k, std::size_t n,
             const double* A, const double* B, double* C, bool accumulate);

// C[m,n] (+)= A[k,m]^T * B[k,n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
             const double* A, const double* B, double* C, bool accumulate);

void set_parallel_kernels(bool enabled);
bool parallel_kernels_enabled();

}  // namespace flowal
