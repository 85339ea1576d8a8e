#include "flowal/linalg.hpp"

#include <atomic>
#include <vector>

namespace flowal {

namespace {
std::atomic<bool> g_parallel{true};
constexpr std::size_t kParallelRowThreshold = 64;
}  // namespace

void set_parallel_kernels(bool enabled) { g_parallel.store(enabled); }
bool parallel_kernels_enabled() { return g_parallel.load(); }

void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             const double* A, const double* B, double* C, bool accumulate) {
    const bool par = g_parallel.load() && m >= kParallelRowThreshold;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = C + i * n;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
        const double* ai = A + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double a = ai[kk];
            const double* bk = B + kk * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += a * bk[j];
        }
    }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n,
             const double* A, const double* B, double* C, bool accumulate) {
    const bool par = g_parallel.load() && m >= kParallelRowThreshold;
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = A + i * k;
        double* ci = C + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = B + j * k;
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
            if (accumulate)
                ci[j] += acc;
            else
                ci[j] = acc;
        }
    }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
             const double* A, const double* B, double* C, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < m * n; ++i) C[i] = 0.0;
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* ak = A + kk * m;
        const double* bk = B + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double a = ak[i];
            if (a == 0.0) continue;
            double* ci = C + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += a * bk[j];
        }
    }
}

}  // namespace flowal
