#pragma once

#include <cstddef>
#include <string>

namespace bmt::simd {

// Double-precision kernels behind the numeric inner loops (mixture E/M steps,
// feature standardization, attention-layer linear algebra). Every kernel has
// a scalar reference implementation and, on capable x86-64 hosts, an AVX2
// variant selected at runtime. Elementwise kernels are bit-identical across
// variants (same per-element operation sequence, no FMA contraction);
// reductions may differ in summation order and agree to tight tolerance.

enum class Isa { scalar, avx2 };

// Currently selected implementation. Resolved once from CPU detection and the
// BMTRAJ_SIMD environment variable ("scalar", "avx2", or "auto").
Isa active_isa();
const char* isa_name(Isa isa);

// Override the selection; throws when the requested ISA is unavailable.
void force_isa(Isa isa);
void force_isa(const std::string& name);  // "scalar" | "avx2" | "auto"

bool avx2_available();

// ---- reductions ----
double sum(const double* x, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sq_dist(const double* x, const double* y, std::size_t n);
// sum_i w[i] * (x[i] - center)^2
double weighted_sq_dev(const double* w, const double* x, double center, std::size_t n);

// ---- elementwise (bit-identical across variants) ----
// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);
// out[i] = (x[i] - mean) * inv_sigma
void zscore(const double* x, double mean, double inv_sigma, double* out, std::size_t n);
// acc[i] += (x[i] - mu)^2 * inv_var   (diagonal-Gaussian quadratic form,
// accumulated one dimension at a time over a column of points)
void accum_sq_scaled(const double* x, double mu, double inv_var, double* acc, std::size_t n);

// ---- small dense algebra ----
// Row-major A (rows x cols): out[r] = dot(A[r,:], x)
void matvec(const double* a, const double* x, std::size_t rows, std::size_t cols, double* out);

// Implementation tables, exposed for the equivalence tests.
struct KernelTable {
    double (*sum)(const double*, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    double (*sq_dist)(const double*, const double*, std::size_t);
    double (*weighted_sq_dev)(const double*, const double*, double, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*zscore)(const double*, double, double, double*, std::size_t);
    void (*accum_sq_scaled)(const double*, double, double, double*, std::size_t);
    void (*matvec)(const double*, const double*, std::size_t, std::size_t, double*);
};

const KernelTable& scalar_kernels();
const KernelTable* avx2_kernels();  // nullptr when not compiled in / unsupported

}  // namespace bmt::simd
