#include "bmt/simd.hpp"

// AVX2 kernels. Reductions use FMA and lane-parallel partial sums, so they
// differ from the scalar path only in summation order. Elementwise kernels
// use separate mul/add so each output element gets the exact operation
// sequence of the reference kernel.

#if defined(BMT_HAVE_AVX2)

#include <immintrin.h>

namespace bmt::simd {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    double total = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) total += x[i];
    return total;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    double total = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) total += x[i] * y[i];
    return total;
}

double sq_dist_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double total = hsum(acc);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        total += d * d;
    }
    return total;
}

double weighted_sq_dev_avx2(const double* w, const double* x, double center, std::size_t n) {
    const __m256d c = _mm256_set1_pd(center);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), c);
        __m256d wd = _mm256_mul_pd(_mm256_loadu_pd(w + i), d);
        acc = _mm256_fmadd_pd(wd, d, acc);
    }
    double total = hsum(acc);
    for (; i < n; ++i) {
        const double d = x[i] - center;
        total += w[i] * d * d;
    }
    return total;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void zscore_avx2(const double* x, double mean, double inv_sigma, double* out, std::size_t n) {
    const __m256d m = _mm256_set1_pd(mean);
    const __m256d s = _mm256_set1_pd(inv_sigma);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_sub_pd(_mm256_loadu_pd(x + i), m);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(v, s));
    }
    for (; i < n; ++i) out[i] = (x[i] - mean) * inv_sigma;
}

void accum_sq_scaled_avx2(const double* x, double mu, double inv_var, double* acc,
                          std::size_t n) {
    const __m256d m = _mm256_set1_pd(mu);
    const __m256d iv = _mm256_set1_pd(inv_var);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), m);
        __m256d t = _mm256_mul_pd(_mm256_mul_pd(d, d), iv);
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), t));
    }
    for (; i < n; ++i) {
        const double d = x[i] - mu;
        acc[i] = acc[i] + d * d * inv_var;
    }
}

void matvec_avx2(const double* a, const double* x, std::size_t rows, std::size_t cols,
                 double* out) {
    for (std::size_t r = 0; r < rows; ++r) out[r] = dot_avx2(a + r * cols, x, cols);
}

}  // namespace

const KernelTable* avx2_kernels() {
    static const KernelTable table{
        sum_avx2,   dot_avx2,    sq_dist_avx2,        weighted_sq_dev_avx2,
        axpy_avx2,  zscore_avx2, accum_sq_scaled_avx2, matvec_avx2,
    };
    return &table;
}

}  // namespace bmt::simd

#else

namespace bmt::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace bmt::simd

#endif
