#include "bmt/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "bmt/errors.hpp"

namespace bmt::simd {

namespace {

bool cpu_has_avx2() {
#if defined(BMT_HAVE_AVX2) && (defined(__x86_64__) || defined(_M_X64))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa detect_initial() {
    const char* env = std::getenv("BMTRAJ_SIMD");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
        if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Isa::avx2;
        // "auto" or anything unrecognized falls through to detection.
    }
    return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<const KernelTable*>& active_table() {
    static std::atomic<const KernelTable*> table{
        detect_initial() == Isa::avx2 ? avx2_kernels() : &scalar_kernels()};
    return table;
}

}  // namespace

bool avx2_available() { return cpu_has_avx2() && avx2_kernels() != nullptr; }

Isa active_isa() {
    return active_table().load() == &scalar_kernels() ? Isa::scalar : Isa::avx2;
}

const char* isa_name(Isa isa) { return isa == Isa::scalar ? "scalar" : "avx2"; }

void force_isa(Isa isa) {
    if (isa == Isa::avx2) {
        if (!avx2_available())
            throw ValidationError("simd", "avx2 kernels unavailable on this host");
        active_table().store(avx2_kernels());
    } else {
        active_table().store(&scalar_kernels());
    }
}

void force_isa(const std::string& name) {
    if (name == "scalar") force_isa(Isa::scalar);
    else if (name == "avx2") force_isa(Isa::avx2);
    else if (name == "auto") active_table().store(
        avx2_available() ? avx2_kernels() : &scalar_kernels());
    else throw ValidationError("simd", "unknown isa", name);
}

double sum(const double* x, std::size_t n) { return active_table().load()->sum(x, n); }

double dot(const double* x, const double* y, std::size_t n) {
    return active_table().load()->dot(x, y, n);
}

double sq_dist(const double* x, const double* y, std::size_t n) {
    return active_table().load()->sq_dist(x, y, n);
}

double weighted_sq_dev(const double* w, const double* x, double center, std::size_t n) {
    return active_table().load()->weighted_sq_dev(w, x, center, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    active_table().load()->axpy(a, x, y, n);
}

void zscore(const double* x, double mean, double inv_sigma, double* out, std::size_t n) {
    active_table().load()->zscore(x, mean, inv_sigma, out, n);
}

void accum_sq_scaled(const double* x, double mu, double inv_var, double* acc, std::size_t n) {
    active_table().load()->accum_sq_scaled(x, mu, inv_var, acc, n);
}

void matvec(const double* a, const double* x, std::size_t rows, std::size_t cols, double* out) {
    active_table().load()->matvec(a, x, rows, cols, out);
}

}  // namespace bmt::simd
