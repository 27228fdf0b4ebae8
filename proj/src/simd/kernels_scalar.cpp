#include "bmt/simd.hpp"

// Reference kernels. Compiled with -ffp-contract=off so the per-element
// operation sequence matches the vector variants exactly.

namespace bmt::simd {

namespace {

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sq_dist_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double weighted_sq_dev_scalar(const double* w, const double* x, double center, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - center;
        acc += w[i] * d * d;
    }
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void zscore_scalar(const double* x, double mean, double inv_sigma, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - mean) * inv_sigma;
}

void accum_sq_scaled_scalar(const double* x, double mu, double inv_var, double* acc,
                            std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mu;
        acc[i] = acc[i] + d * d * inv_var;
    }
}

void matvec_scalar(const double* a, const double* x, std::size_t rows, std::size_t cols,
                   double* out) {
    for (std::size_t r = 0; r < rows; ++r) out[r] = dot_scalar(a + r * cols, x, cols);
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{
        sum_scalar,   dot_scalar,    sq_dist_scalar,        weighted_sq_dev_scalar,
        axpy_scalar,  zscore_scalar, accum_sq_scaled_scalar, matvec_scalar,
    };
    return table;
}

}  // namespace bmt::simd
