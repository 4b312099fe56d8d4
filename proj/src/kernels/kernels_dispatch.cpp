#include <cstdlib>
#include <cstring>
#include <string>

#include "mmclass/kernels.hpp"

namespace mmc::kernels {

namespace {

using detail::Ops;

bool backend_supported(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return detail::avx2_supported();
#else
            return false;
#endif
        case Backend::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const Ops& ops_for(Backend b) {
    switch (b) {
#if defined(__x86_64__) || defined(_M_X64)
        case Backend::avx2:
            return detail::avx2_ops();
#endif
#if defined(__aarch64__)
        case Backend::neon:
            return detail::neon_ops();
#endif
        default:
            return detail::scalar_ops();
    }
}

Backend pick_default() {
    if (const char* env = std::getenv("MMCLASS_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0 && backend_supported(Backend::avx2))
            return Backend::avx2;
        if (std::strcmp(env, "neon") == 0 && backend_supported(Backend::neon))
            return Backend::neon;
    }
    if (backend_supported(Backend::avx2)) return Backend::avx2;
    if (backend_supported(Backend::neon)) return Backend::neon;
    return Backend::scalar;
}

struct State {
    Backend backend;
    const Ops* ops;
    State() : backend(pick_default()), ops(&ops_for(backend)) {}
};

State& state() {
    static State s;
    return s;
}

}  // namespace

Backend active_backend() { return state().backend; }

bool set_backend(Backend b) {
    if (!backend_supported(b)) return false;
    state().backend = b;
    state().ops = &ops_for(b);
    return true;
}

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::scalar:
            return "scalar";
        case Backend::avx2:
            return "avx2";
        case Backend::neon:
            return "neon";
    }
    return "scalar";
}

double dot(const double* a, const double* b, std::size_t n) {
    return state().ops->dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    state().ops->axpy(alpha, x, y, n);
}

void matvec(const double* w, const double* x, const double* bias, double* out,
            std::size_t rows, std::size_t cols) {
    state().ops->matvec(w, x, bias, out, rows, cols);
}

void matvec_t(const double* w, const double* d, double* out, std::size_t rows,
              std::size_t cols) {
    state().ops->matvec_t(w, d, out, rows, cols);
}

void ger(double* a, const double* d, const double* x, std::size_t rows,
         std::size_t cols) {
    state().ops->ger(a, d, x, rows, cols);
}

void relu(double* x, std::size_t n) { state().ops->relu(x, n); }

void relu_backward(const double* act, double* grad, std::size_t n) {
    state().ops->relu_backward(act, grad, n);
}

double sum_squares(const double* x, std::size_t n) {
    return state().ops->sum_squares(x, n);
}

void scale(double* x, double alpha, std::size_t n) { state().ops->scale(x, alpha, n); }

void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps, double corr1,
               double corr2) {
    state().ops->adam_step(w, g, m, v, n, lr, beta1, beta2, eps, corr1, corr2);
}

}  // namespace mmc::kernels
