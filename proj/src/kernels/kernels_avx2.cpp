#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "mmclass/kernels.hpp"

// AVX2+FMA variants, 4 doubles per vector. Tails handled scalar. Reductions
// use 4 independent lanes, so low-order bits may differ from the scalar
// reference.

namespace mmc::kernels::detail {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    double result = hsum(acc);
    for (; i < n; ++i) result += a[i] * b[i];
    return result;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_avx2(const double* w, const double* x, const double* bias, double* out,
                 std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        out[r] = dot_avx2(w + r * cols, x, cols) + (bias ? bias[r] : 0.0);
    }
}

void matvec_t_avx2(const double* w, const double* d, double* out, std::size_t rows,
                   std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(d[r], w + r * cols, out, cols);
}

void ger_avx2(double* a, const double* d, const double* x, std::size_t rows,
              std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(d[r], x, a + r * cols, cols);
}

void relu_avx2(double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_avx2(const double* act, double* grad, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(act + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(grad + i, _mm256_and_pd(_mm256_loadu_pd(grad + i), mask));
    }
    for (; i < n; ++i)
        if (act[i] <= 0.0) grad[i] = 0.0;
}

double sum_squares_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double result = hsum(acc);
    for (; i < n; ++i) result += x[i] * x[i];
    return result;
}

void scale_avx2(double* x, double alpha, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    }
    for (; i < n; ++i) x[i] *= alpha;
}

void adam_step_avx2(double* w, const double* g, double* m, double* v, std::size_t n,
                    double lr, double beta1, double beta2, double eps, double corr1,
                    double corr2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d v1mb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d v1mb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vc1 = _mm256_set1_pd(corr1);
    const __m256d vc2 = _mm256_set1_pd(corr2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        vm = _mm256_fmadd_pd(v1mb1, vg, _mm256_mul_pd(vb1, vm));
        vv = _mm256_fmadd_pd(v1mb2, _mm256_mul_pd(vg, vg), _mm256_mul_pd(vb2, vv));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_mul_pd(vm, vc1);
        const __m256d vhat = _mm256_mul_pd(vv, vc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        w[i] -= lr * (m[i] * corr1) / (std::sqrt(v[i] * corr2) + eps);
    }
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops ops = {dot_avx2,          axpy_avx2,  matvec_avx2,
                            matvec_t_avx2,     ger_avx2,   relu_avx2,
                            relu_backward_avx2, sum_squares_avx2, scale_avx2,
                            adam_step_avx2};
    return ops;
}

bool avx2_supported() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace mmc::kernels::detail

#endif  // x86-64
