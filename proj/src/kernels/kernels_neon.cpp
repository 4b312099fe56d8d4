#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

#include "mmclass/kernels.hpp"

// NEON variants, 2 doubles per vector. aarch64 baseline, no runtime probe
// needed.

namespace mmc::kernels::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
    }
    double result = vaddvq_f64(acc);
    for (; i < n; ++i) result += a[i] * b[i];
    return result;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_neon(const double* w, const double* x, const double* bias, double* out,
                 std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        out[r] = dot_neon(w + r * cols, x, cols) + (bias ? bias[r] : 0.0);
    }
}

void matvec_t_neon(const double* w, const double* d, double* out, std::size_t rows,
                   std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy_neon(d[r], w + r * cols, out, cols);
}

void ger_neon(double* a, const double* d, const double* x, std::size_t rows,
              std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy_neon(d[r], x, a + r * cols, cols);
}

void relu_neon(double* x, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(x + i, vmaxq_f64(vld1q_f64(x + i), zero));
    }
    for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_neon(const double* act, double* grad, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const uint64x2_t mask = vcgtq_f64(vld1q_f64(act + i), zero);
        const float64x2_t g = vld1q_f64(grad + i);
        vst1q_f64(grad + i,
                  vreinterpretq_f64_u64(vandq_u64(vreinterpretq_u64_f64(g), mask)));
    }
    for (; i < n; ++i)
        if (act[i] <= 0.0) grad[i] = 0.0;
}

double sum_squares_neon(const double* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t v = vld1q_f64(x + i);
        acc = vfmaq_f64(acc, v, v);
    }
    double result = vaddvq_f64(acc);
    for (; i < n; ++i) result += x[i] * x[i];
    return result;
}

void scale_neon(double* x, double alpha, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), va));
    }
    for (; i < n; ++i) x[i] *= alpha;
}

void adam_step_neon(double* w, const double* g, double* m, double* v, std::size_t n,
                    double lr, double beta1, double beta2, double eps, double corr1,
                    double corr2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        w[i] -= lr * (m[i] * corr1) / (std::sqrt(v[i] * corr2) + eps);
    }
}

}  // namespace

const Ops& neon_ops() {
    static const Ops ops = {dot_neon,          axpy_neon,  matvec_neon,
                            matvec_t_neon,     ger_neon,   relu_neon,
                            relu_backward_neon, sum_squares_neon, scale_neon,
                            adam_step_neon};
    return ops;
}

}  // namespace mmc::kernels::detail

#endif  // aarch64
