#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "bmt/parallel.hpp"
#include "bmt/cluster.hpp"
#include "bmt/rng.hpp"

using namespace bmt;

TEST_CASE("two well-separated blobs are recovered") {
    Rng rng(1);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 100; ++i) data.push_back({rng.normal(0.0, 0.5)});
    for (int i = 0; i < 100; ++i) data.push_back({rng.normal(10.0, 0.5)});
    GmmFitOptions opts;
    opts.k = 2;
    opts.seed = 1;
    const auto model = fit_gmm(data, opts);
    std::vector<double> means = {model.means[0][0], model.means[1][0]};
    std::sort(means.begin(), means.end());
    CHECK(std::fabs(means[0] - 0.0) < 0.2);
    CHECK(std::fabs(means[1] - 10.0) < 0.2);
    CHECK(model.weights[0] + model.weights[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identical points collapse to the floor variance") {
    std::vector<std::vector<double>> data(20, {3.5, -1.0});
    GmmFitOptions opts;
    opts.k = 1;
    opts.seed = 3;
    const auto model = fit_gmm(data, opts);
    CHECK(model.means[0][0] == doctest::Approx(3.5));
    CHECK(model.means[0][1] == doctest::Approx(-1.0));
    CHECK(model.variances[0][0] == doctest::Approx(1e-6));
    CHECK(model.variances[0][1] == doctest::Approx(1e-6));
}

TEST_CASE("log-likelihood traces are non-decreasing") {
    Rng rng(5);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 150; ++i) {
        const double c = rng.uniform01() < 0.4 ? -2.0 : 3.0;
        data.push_back({rng.normal(c, 1.0), rng.normal(-c, 0.7)});
    }
    GmmFitOptions opts;
    opts.k = 3;
    opts.seed = 5;
    GmmFitReport report;
    fit_gmm(data, opts, &report);
    REQUIRE(report.restart_traces.size() == 10);
    for (const auto& trace : report.restart_traces) {
        REQUIRE(trace.size() >= 2);
        for (std::size_t t = 1; t < trace.size(); ++t)
            CHECK(trace[t] - trace[t - 1] >= -1e-9 * std::max(1.0, std::fabs(trace[t - 1])));
    }
}

TEST_CASE("fitting is deterministic for a fixed seed") {
    Rng rng(6);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 80; ++i) data.push_back({rng.uniform(0, 1), rng.uniform(0, 1)});
    GmmFitOptions opts;
    opts.k = 3;
    opts.seed = 42;
    const auto a = fit_gmm(data, opts);
    const auto b = fit_gmm(data, opts);
    CHECK(a.log_likelihood == b.log_likelihood);
    CHECK(a.weights == b.weights);
    CHECK(a.means == b.means);
    CHECK(a.variances == b.variances);
}

TEST_CASE("results do not depend on the worker count") {
    Rng rng(7);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 90; ++i) data.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
    GmmFitOptions opts;
    opts.k = 3;
    opts.seed = 31;
    set_max_threads(1);
    const auto serial = fit_gmm(data, opts);
    set_max_threads(4);
    const auto parallel = fit_gmm(data, opts);
    set_max_threads(0);
    CHECK(serial.log_likelihood == parallel.log_likelihood);
    CHECK(serial.means == parallel.means);
    CHECK(serial.weights == parallel.weights);
}

TEST_CASE("need more points than components") {
    std::vector<std::vector<double>> data(5, {1.0});
    GmmFitOptions opts;
    opts.k = 5;
    CHECK_THROWS_AS(fit_gmm(data, opts), ValidationError);
}

TEST_CASE("assignment responsibilities") {
    GmmModel model;
    model.k = 2;
    model.dim = 1;
    model.weights = {0.5, 0.5};
    model.means = {{0.0}, {10.0}};
    model.variances = {{1.0}, {1.0}};

    const auto at_mean = assign(model, {{0.0}});
    REQUIRE(at_mean.size() == 1);
    CHECK(at_mean[0].cluster == 0);
    CHECK(at_mean[0].responsibilities[0] > 0.99);

    const auto midpoint = assign(model, {{5.0}});
    CHECK(midpoint[0].responsibilities[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(midpoint[0].cluster == 0);  // tie resolves to the lowest index

    CHECK(assign(model, {}).empty());
    CHECK_THROWS_AS(assign(model, {{1.0, 2.0}}), ValidationError);
}

TEST_CASE("responsibilities always sum to one") {
    Rng rng(8);
    std::vector<std::vector<double>> data;
    for (int i = 0; i < 120; ++i)
        data.push_back({rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)});
    GmmFitOptions opts;
    opts.k = 4;
    opts.seed = 9;
    const auto model = fit_gmm(data, opts);
    for (const auto& a : assign(model, data)) {
        double sum = 0.0;
        for (double r : a.responsibilities) sum += r;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        int argmax = 0;
        for (int c = 1; c < model.k; ++c)
            if (a.responsibilities[c] > a.responsibilities[argmax]) argmax = c;
        CHECK(a.cluster == argmax);
    }
}

TEST_CASE("profiles average members and histogram outcomes") {
    GmmModel model;
    model.k = 2;
    model.dim = 6;
    model.weights = {0.5, 0.5};
    model.means = {{0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1}};
    model.variances.assign(2, std::vector<double>(6, 0.01));

    std::vector<std::vector<double>> data = {
        {0.4, 0.3, 0.2, 0.1, 0.0, 0.0},
        {0.4, 0.3, 0.2, 0.1, 0.0, 0.0},
        {1.2, 1.4, 1.6, 1.8, 2.0, 2.2},
        {1.2, 1.4, 1.6, 1.8, 2.0, 2.2},
    };
    const auto assignments = assign(model, data);
    const std::vector<ResponseCategory> t6 = {ResponseCategory::CR, ResponseCategory::CR,
                                              ResponseCategory::PD, ResponseCategory::PD};
    const auto profiles = cluster_profiles(model, data, assignments, t6);
    REQUIRE_FALSE(profiles.empty[0]);
    CHECK(profiles.mean_trajectories[0][0] == 1.0);  // constant t0 prepended
    for (int j = 0; j < 6; ++j)
        CHECK(profiles.mean_trajectories[0][j + 1] == doctest::Approx(data[0][j]));
    CHECK(profiles.t6_histograms[0][static_cast<int>(ResponseCategory::CR)] == 2);
    CHECK(profiles.t6_histograms[1][static_cast<int>(ResponseCategory::PD)] == 2);
    long long total = 0;
    for (const auto& h : profiles.t6_histograms)
        for (long long c : h) total += c;
    CHECK(total == 4);
}

TEST_CASE("empty clusters produce warnings") {
    GmmModel model;
    model.k = 2;
    model.dim = 1;
    model.weights = {0.999, 0.001};
    model.means = {{0.0}, {100.0}};
    model.variances = {{1.0}, {1.0}};
    const std::vector<std::vector<double>> data = {{0.1}, {-0.1}};
    const auto assignments = assign(model, data);
    const auto profiles = cluster_profiles(
        model, data, assignments, {ResponseCategory::SD, ResponseCategory::SD});
    CHECK(profiles.empty[1]);
    CHECK_FALSE(profiles.warnings.empty());
}
