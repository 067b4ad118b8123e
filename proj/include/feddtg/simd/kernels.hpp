#pragma once

// Dense double-precision kernels behind the network engine. Every kernel has a
// scalar reference and, on x86-64, an AVX2/FMA variant chosen at runtime.
// Variants agree to rounding (different summation order), not bitwise, so a
// run is reproducible only under the same kernel set.

#include <cstddef>
#include <string_view>

namespace feddtg::simd {

struct KernelTable {
    std::string_view name;

    // c[m x n] += a[m x k] * b[n x k]^T
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c);
    // c[m x n] += a[m x k] * b[k x n]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c);
    // c[m x n] += a[k x m]^T * b[k x n]
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c);
    // y += alpha * x
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    // x *= alpha
    void (*scale)(std::size_t n, double alpha, double* x);
    // Adam update with precomputed bias corrections bc1 = 1 - b1^t, bc2 = 1 - b2^t.
    void (*adam)(std::size_t n, double* params, const double* grads, double* m, double* v,
                 double lr, double beta1, double beta2, double eps, double bc1, double bc2);
};

const KernelTable& scalar_kernels();

/// nullptr when the binary or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

/// Kernel set used by the engine. Picked once: FEDDTG_KERNELS=scalar|avx2
/// overrides, otherwise the widest supported set.
const KernelTable& active_kernels();

}  // namespace feddtg::simd
