#pragma once

#include <cstddef>
#include <string>

/// Dense double-precision kernels used by the training inner loops.
///
/// Every operation has a scalar reference implementation and, where the
/// hardware supports it, a SIMD variant (AVX2+FMA on x86-64, NEON on
/// aarch64). The backend is chosen once at startup from CPU capabilities
/// and can be overridden with the MMCLASS_KERNELS environment variable
/// ("scalar", "avx2", "neon") or set_backend(). SIMD variants are
/// equivalence-tested against the scalar reference; reductions may differ
/// from the reference by reassociation only.
namespace mmc::kernels {

enum class Backend { scalar, avx2, neon };

Backend active_backend();
/// Force a backend; returns false (and leaves the state unchanged) if the
/// requested backend is not supported on this machine.
bool set_backend(Backend b);
std::string backend_name(Backend b);

/// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);

/// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

/// out = W x + bias, W row-major [rows x cols]; bias may be null.
void matvec(const double* w, const double* x, const double* bias, double* out,
            std::size_t rows, std::size_t cols);

/// out = W^T d, W row-major [rows x cols], d has rows entries. out is
/// overwritten.
void matvec_t(const double* w, const double* d, double* out, std::size_t rows,
              std::size_t cols);

/// A += d x^T (rank-1 accumulate), A row-major [rows x cols].
void ger(double* a, const double* d, const double* x, std::size_t rows, std::size_t cols);

/// x[i] = max(x[i], 0)
void relu(double* x, std::size_t n);

/// grad[i] = act[i] > 0 ? grad[i] : 0
void relu_backward(const double* act, double* grad, std::size_t n);

/// sum_i x[i]^2
double sum_squares(const double* x, std::size_t n);

/// x *= alpha
void scale(double* x, double alpha, std::size_t n);

/// One Adam step over a parameter tensor. corr1 = 1/(1-beta1^t),
/// corr2 = 1/(1-beta2^t) are passed in precomputed.
void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps, double corr1,
               double corr2);

namespace detail {

struct Ops {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*matvec)(const double*, const double*, const double*, double*, std::size_t,
                   std::size_t);
    void (*matvec_t)(const double*, const double*, double*, std::size_t, std::size_t);
    void (*ger)(double*, const double*, const double*, std::size_t, std::size_t);
    void (*relu)(double*, std::size_t);
    void (*relu_backward)(const double*, double*, std::size_t);
    double (*sum_squares)(const double*, std::size_t);
    void (*scale)(double*, double, std::size_t);
    void (*adam_step)(double*, const double*, double*, double*, std::size_t, double,
                      double, double, double, double, double);
};

const Ops& scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops();
bool avx2_supported();
#endif
#if defined(__aarch64__)
const Ops& neon_ops();
#endif

}  // namespace detail

}  // namespace mmc::kernels
