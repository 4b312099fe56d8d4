#include <cmath>

#include "mmclass/kernels.hpp"

// Reference implementations. These define the semantics the SIMD variants
// are tested against.

namespace mmc::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_scalar(const double* w, const double* x, const double* bias, double* out,
                   std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = bias ? bias[r] : 0.0;
        const double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
}

void matvec_t_scalar(const double* w, const double* d, double* out, std::size_t rows,
                     std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double dr = d[r];
        const double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += dr * row[c];
    }
}

void ger_scalar(double* a, const double* d, const double* x, std::size_t rows,
                std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double dr = d[r];
        double* row = a + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += dr * x[c];
    }
}

void relu_scalar(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(const double* act, double* grad, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (act[i] <= 0.0) grad[i] = 0.0;
}

double sum_squares_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void scale_scalar(double* x, double alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void adam_step_scalar(double* w, const double* g, double* m, double* v, std::size_t n,
                      double lr, double beta1, double beta2, double eps, double corr1,
                      double corr2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] * corr1;
        const double vhat = v[i] * corr2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops = {dot_scalar,         axpy_scalar,  matvec_scalar,
                            matvec_t_scalar,    ger_scalar,   relu_scalar,
                            relu_backward_scalar, sum_squares_scalar, scale_scalar,
                            adam_step_scalar};
    return ops;
}

}  // namespace mmc::kernels::detail
