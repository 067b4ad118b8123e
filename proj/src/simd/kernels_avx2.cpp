#include "feddtg/simd/kernels.hpp"

#if defined(FEDDTG_HAVE_AVX2_TU) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

namespace feddtg::simd {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double dot(std::size_t k, const double* x, const double* y) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t p = 0;
    for (; p + 8 <= k; p += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + p), _mm256_loadu_pd(y + p), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + p + 4), _mm256_loadu_pd(y + p + 4), acc1);
    }
    for (; p + 4 <= k; p += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + p), _mm256_loadu_pd(y + p), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; p < k; ++p) acc += x[p] * y[p];
    return acc;
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        std::size_t j = 0;
        // 1x4 micro-kernel: one row of a against four rows of b.
        for (; j + 4 <= n; j += 4) {
            const double* b0 = b + (j + 0) * k;
            const double* b1 = b + (j + 1) * k;
            const double* b2 = b + (j + 2) * k;
            const double* b3 = b + (j + 3) * k;
            __m256d s0 = _mm256_setzero_pd();
            __m256d s1 = _mm256_setzero_pd();
            __m256d s2 = _mm256_setzero_pd();
            __m256d s3 = _mm256_setzero_pd();
            std::size_t p = 0;
            for (; p + 4 <= k; p += 4) {
                const __m256d av = _mm256_loadu_pd(ai + p);
                s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), s0);
                s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
                s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
                s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
            }
            double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
            for (; p < k; ++p) {
                const double av = ai[p];
                r0 += av * b0[p];
                r1 += av * b1[p];
                r2 += av * b2[p];
                r3 += av * b3[p];
            }
            double* ci = c + i * n + j;
            ci[0] += r0;
            ci[1] += r1;
            ci[2] += r2;
            ci[3] += r3;
        }
        for (; j < n; ++j) c[i * n + j] += dot(k, ai, b + j * k);
    }
}

inline void axpy_row(std::size_t n, double s, const double* x, double* y) {
    const __m256d sv = _mm256_set1_pd(s);
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        _mm256_storeu_pd(y + j, _mm256_fmadd_pd(sv, _mm256_loadu_pd(x + j), _mm256_loadu_pd(y + j)));
        _mm256_storeu_pd(y + j + 4,
                         _mm256_fmadd_pd(sv, _mm256_loadu_pd(x + j + 4), _mm256_loadu_pd(y + j + 4)));
    }
    for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(y + j, _mm256_fmadd_pd(sv, _mm256_loadu_pd(x + j), _mm256_loadu_pd(y + j)));
    }
    for (; j < n; ++j) y[j] += s * x[j];
}

// Accumulates four scaled rows at once so each pass over c does four FMAs per load/store.
inline void axpy_row4(std::size_t n, const double s[4], const double* x0, const double* x1,
                      const double* x2, const double* x3, double* y) {
    const __m256d s0 = _mm256_set1_pd(s[0]);
    const __m256d s1 = _mm256_set1_pd(s[1]);
    const __m256d s2 = _mm256_set1_pd(s[2]);
    const __m256d s3 = _mm256_set1_pd(s[3]);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_loadu_pd(y + j);
        acc = _mm256_fmadd_pd(s0, _mm256_loadu_pd(x0 + j), acc);
        acc = _mm256_fmadd_pd(s1, _mm256_loadu_pd(x1 + j), acc);
        acc = _mm256_fmadd_pd(s2, _mm256_loadu_pd(x2 + j), acc);
        acc = _mm256_fmadd_pd(s3, _mm256_loadu_pd(x3 + j), acc);
        _mm256_storeu_pd(y + j, acc);
    }
    for (; j < n; ++j) {
        y[j] += s[0] * x0[j];
        y[j] += s[1] * x1[j];
        y[j] += s[2] * x2[j];
        y[j] += s[3] * x3[j];
    }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        std::size_t p = 0;
        for (; p + 4 <= k; p += 4) {
            const double s[4] = {ai[p], ai[p + 1], ai[p + 2], ai[p + 3]};
            axpy_row4(n, s, b + p * n, b + (p + 1) * n, b + (p + 2) * n, b + (p + 3) * n, ci);
        }
        for (; p < k; ++p) axpy_row(n, ai[p], b + p * n, ci);
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        std::size_t p = 0;
        for (; p + 4 <= k; p += 4) {
            const double s[4] = {a[p * m + i], a[(p + 1) * m + i], a[(p + 2) * m + i], a[(p + 3) * m + i]};
            axpy_row4(n, s, b + p * n, b + (p + 1) * n, b + (p + 2) * n, b + (p + 3) * n, ci);
        }
        for (; p < k; ++p) axpy_row(n, a[p * m + i], b + p * n, ci);
    }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) { axpy_row(n, alpha, x, y); }

void scale(std::size_t n, double alpha, double* x) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

void adam(std::size_t n, double* params, const double* grads, double* m, double* v,
          double lr, double beta1, double beta2, double eps, double bc1, double bc2) {
    const __m256d b1 = _mm256_set1_pd(beta1);
    const __m256d b1c = _mm256_set1_pd(1.0 - beta1);
    const __m256d b2 = _mm256_set1_pd(beta2);
    const __m256d b2c = _mm256_set1_pd(1.0 - beta2);
    const __m256d inv_bc1 = _mm256_set1_pd(1.0 / bc1);
    const __m256d inv_bc2 = _mm256_set1_pd(1.0 / bc2);
    const __m256d lrv = _mm256_set1_pd(lr);
    const __m256d epsv = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grads + i);
        __m256d mv = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        mv = _mm256_fmadd_pd(b1, mv, _mm256_mul_pd(b1c, g));
        vv = _mm256_fmadd_pd(b2, vv, _mm256_mul_pd(b2c, _mm256_mul_pd(g, g)));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vv, inv_bc2)), epsv);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, _mm256_mul_pd(mv, inv_bc1)), denom);
        _mm256_storeu_pd(params + i, _mm256_sub_pd(_mm256_loadu_pd(params + i), step));
    }
    for (; i < n; ++i) {
        const double g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

}  // namespace

const KernelTable* avx2_kernels_impl() {
    static const KernelTable table{"avx2", gemm_nt, gemm_nn, gemm_tn, axpy, scale, adam};
    return &table;
}

}  // namespace feddtg::simd

#else

namespace feddtg::simd {
const KernelTable* avx2_kernels_impl() { return nullptr; }
}  // namespace feddtg::simd

#endif
