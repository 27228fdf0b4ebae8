#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "bmt/errors.hpp"
#include "bmt/rng.hpp"
#include "bmt/simd.hpp"

using namespace bmt;

namespace {

const std::vector<std::size_t> kSizes = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17,
                                         31, 32, 33, 100, 1000, 4097};

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Reductions may reassociate; compare against the scalar path with a bound
// scaled by the sum of absolute terms.
void check_reduction(double a, double b, double abs_terms) {
    CHECK(std::fabs(a - b) <= 1e-12 * (1.0 + abs_terms));
}

}  // namespace

TEST_CASE("scalar and avx2 kernels agree") {
    if (!simd::avx2_available()) {
        MESSAGE("avx2 unavailable on this host; skipping equivalence checks");
        return;
    }
    const auto& s = simd::scalar_kernels();
    const auto* v = simd::avx2_kernels();
    REQUIRE(v != nullptr);
    Rng rng(2024);

    for (std::size_t n : kSizes) {
        CAPTURE(n);
        const auto x = random_vec(rng, n);
        const auto y = random_vec(rng, n);
        const auto w = random_vec(rng, n, 0.0, 2.0);
        double abs_sum = 0.0;
        for (double t : x) abs_sum += std::fabs(t);

        check_reduction(s.sum(x.data(), n), v->sum(x.data(), n), abs_sum);
        check_reduction(s.dot(x.data(), y.data(), n), v->dot(x.data(), y.data(), n), abs_sum);
        check_reduction(s.sq_dist(x.data(), y.data(), n), v->sq_dist(x.data(), y.data(), n),
                        4.0 * n);
        check_reduction(s.weighted_sq_dev(w.data(), x.data(), 0.25, n),
                        v->weighted_sq_dev(w.data(), x.data(), 0.25, n), 8.0 * n);

        // Elementwise kernels run the same operation sequence per element and
        // must match bit for bit.
        auto ys = y, yv = y;
        s.axpy(0.37, x.data(), ys.data(), n);
        v->axpy(0.37, x.data(), yv.data(), n);
        CHECK(ys == yv);

        std::vector<double> outs(n), outv(n);
        s.zscore(x.data(), 0.1, 2.5, outs.data(), n);
        v->zscore(x.data(), 0.1, 2.5, outv.data(), n);
        CHECK(outs == outv);

        auto accs = w, accv = w;
        s.accum_sq_scaled(x.data(), -0.2, 3.0, accs.data(), n);
        v->accum_sq_scaled(x.data(), -0.2, 3.0, accv.data(), n);
        CHECK(accs == accv);
    }
}

TEST_CASE("matvec matches a naive product on both paths") {
    Rng rng(7);
    for (std::size_t rows : {1u, 3u, 16u}) {
        for (std::size_t cols : {1u, 2u, 7u, 16u, 33u}) {
            const auto a = random_vec(rng, rows * cols);
            const auto x = random_vec(rng, cols);
            std::vector<double> expected(rows, 0.0);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) expected[r] += a[r * cols + c] * x[c];

            std::vector<double> out(rows);
            simd::scalar_kernels().matvec(a.data(), x.data(), rows, cols, out.data());
            for (std::size_t r = 0; r < rows; ++r)
                CHECK(out[r] == doctest::Approx(expected[r]).epsilon(1e-12));
            if (simd::avx2_available()) {
                simd::avx2_kernels()->matvec(a.data(), x.data(), rows, cols, out.data());
                for (std::size_t r = 0; r < rows; ++r)
                    CHECK(out[r] == doctest::Approx(expected[r]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("force_isa switches the dispatched path") {
    simd::force_isa(simd::Isa::scalar);
    CHECK(simd::active_isa() == simd::Isa::scalar);
    Rng rng(5);
    const auto x = random_vec(rng, 64);
    const auto y = random_vec(rng, 64);
    const double scalar_dot = simd::dot(x.data(), y.data(), 64);
    CHECK(scalar_dot == simd::scalar_kernels().dot(x.data(), y.data(), 64));
    if (simd::avx2_available()) {
        simd::force_isa(simd::Isa::avx2);
        CHECK(simd::active_isa() == simd::Isa::avx2);
        CHECK(simd::dot(x.data(), y.data(), 64) ==
              simd::avx2_kernels()->dot(x.data(), y.data(), 64));
    }
    simd::force_isa("auto");
}

TEST_CASE("unknown isa name is rejected") {
    CHECK_THROWS_AS(simd::force_isa("neon"), ValidationError);
}
