#include "bmt/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "bmt/errors.hpp"
#include "bmt/parallel.hpp"
#include "bmt/rng.hpp"
#include "bmt/simd.hpp"

namespace bmt {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Column-major view of the data: one contiguous array per dimension, which is
// what the accumulation kernels want.
struct Columns {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<std::vector<double>> cols;

    explicit Columns(const std::vector<std::vector<double>>& rows) {
        n = rows.size();
        d = n ? rows[0].size() : 0;
        cols.assign(d, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i) {
            if (rows[i].size() != d)
                throw ValidationError("cluster", "ragged data rows");
            for (std::size_t j = 0; j < d; ++j) cols[j][i] = rows[i][j];
        }
    }
};

struct EmState {
    std::vector<double> weights;                 // K
    std::vector<std::vector<double>> means;      // K x D
    std::vector<std::vector<double>> variances;  // K x D
};

// log N(x | mu, diag var) accumulated for all points of one component.
void component_log_density(const Columns& data, const std::vector<double>& mean,
                           const std::vector<double>& variance, double log_weight,
                           std::vector<double>& out) {
    const std::size_t n = data.n;
    double log_norm = log_weight;
    for (std::size_t j = 0; j < data.d; ++j)
        log_norm -= 0.5 * (kLog2Pi + std::log(variance[j]));
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < data.d; ++j)
        simd::accum_sq_scaled(data.cols[j].data(), mean[j], 1.0 / variance[j], out.data(), n);
    for (std::size_t i = 0; i < n; ++i) out[i] = log_norm - 0.5 * out[i];
}

// k-means++ center seeding: first center uniform, then proportional to the
// squared distance to the nearest chosen center.
std::vector<std::vector<double>> kmeanspp_centers(const std::vector<std::vector<double>>& rows,
                                                  int k, Rng& rng) {
    const std::size_t n = rows.size();
    std::vector<std::vector<double>> centers;
    centers.push_back(rows[rng.uniform_int(n)]);
    std::vector<double> d2(n);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& center : centers)
                best = std::min(best, simd::sq_dist(rows[i].data(), center.data(), rows[i].size()));
            d2[i] = best;
            total += best;
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.uniform_int(n);
        } else {
            const double target = rng.uniform01() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(rows[pick]);
    }
    return centers;
}

EmState initial_state(const std::vector<std::vector<double>>& rows, const Columns& data, int k,
                      double floor, Rng& rng) {
    const std::size_t n = data.n;
    const std::size_t d = data.d;
    const auto centers = kmeanspp_centers(rows, k, rng);

    // Global per-dimension variance as the fallback scale.
    std::vector<double> global_var(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double mean = simd::sum(data.cols[j].data(), n) / static_cast<double>(n);
        double ssd = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double diff = data.cols[j][i] - mean;
            ssd += diff * diff;
        }
        global_var[j] = std::max(floor, ssd / static_cast<double>(n));
    }

    std::vector<int> nearest(n);
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (int c = 0; c < k; ++c) {
            const double dist = simd::sq_dist(rows[i].data(), centers[c].data(), d);
            if (dist < best) {
                best = dist;
                best_c = c;
            }
        }
        nearest[i] = best_c;
    }

    EmState st;
    st.weights.assign(k, 0.0);
    st.means.assign(k, std::vector<double>(d, 0.0));
    st.variances.assign(k, std::vector<double>(d, 0.0));
    std::vector<long long> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        counts[nearest[i]] += 1;
        for (std::size_t j = 0; j < d; ++j) st.means[nearest[i]][j] += rows[i][j];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[c] == 0) {
            st.means[c] = centers[c];
            st.variances[c] = global_var;
        } else {
            for (std::size_t j = 0; j < d; ++j) st.means[c][j] /= static_cast<double>(counts[c]);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = rows[i][j] - st.means[nearest[i]][j];
            st.variances[nearest[i]][j] += diff * diff;
        }
    }
    for (int c = 0; c < k; ++c) {
        if (counts[c] > 0)
            for (std::size_t j = 0; j < d; ++j)
                st.variances[c][j] =
                    std::max(floor, st.variances[c][j] / static_cast<double>(counts[c]));
        // Laplace-smoothed weights keep empty seeds alive for the first E-step.
        st.weights[c] = (static_cast<double>(counts[c]) + 1.0) / (static_cast<double>(n) + k);
    }
    return st;
}

struct RestartResult {
    EmState state;
    double log_likelihood = -std::numeric_limits<double>::infinity();
    std::vector<double> trace;
    int reseeds = 0;
};

RestartResult run_em(const std::vector<std::vector<double>>& rows, const Columns& data,
                     const GmmFitOptions& opt, uint64_t restart_seed) {
    const std::size_t n = data.n;
    const std::size_t d = data.d;
    const int k = opt.k;
    Rng rng(restart_seed);

    RestartResult res;
    res.state = initial_state(rows, data, k, opt.variance_floor, rng);
    EmState& st = res.state;

    std::vector<std::vector<double>> log_resp(k, std::vector<double>(n));
    std::vector<double> global_var(d);
    {
        for (std::size_t j = 0; j < d; ++j) {
            const double mean = simd::sum(data.cols[j].data(), n) / static_cast<double>(n);
            double ssd = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double diff = data.cols[j][i] - mean;
                ssd += diff * diff;
            }
            global_var[j] = std::max(opt.variance_floor, ssd / static_cast<double>(n));
        }
    }

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opt.max_iter; ++iter) {
        // E-step: joint log densities, normalized per point in log space.
        for (int c = 0; c < k; ++c)
            component_log_density(data, st.means[c], st.variances[c], std::log(st.weights[c]),
                                  log_resp[c]);
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mx = log_resp[0][i];
            for (int c = 1; c < k; ++c) mx = std::max(mx, log_resp[c][i]);
            double sum = 0.0;
            for (int c = 0; c < k; ++c) sum += std::exp(log_resp[c][i] - mx);
            const double lse = mx + std::log(sum);
            ll += lse;
            for (int c = 0; c < k; ++c) log_resp[c][i] = std::exp(log_resp[c][i] - lse);
        }
        res.trace.push_back(ll);

        // M-step (log_resp now holds plain responsibilities).
        bool reseeded = false;
        for (int c = 0; c < k; ++c) {
            const double nk = simd::sum(log_resp[c].data(), n);
            const double new_weight = nk / static_cast<double>(n);
            if (new_weight < 1.0 / (10.0 * static_cast<double>(n))) {
                if (++res.reseeds > 3 * k)
                    throw ValidationError("cluster",
                                          "degenerate component persisted after re-seeding");
                const std::size_t pick = rng.uniform_int(n);
                st.means[c] = rows[pick];
                st.variances[c] = global_var;
                st.weights[c] = 1.0 / static_cast<double>(k);
                reseeded = true;
                continue;
            }
            st.weights[c] = new_weight;
            for (std::size_t j = 0; j < d; ++j) {
                const double mean =
                    simd::dot(log_resp[c].data(), data.cols[j].data(), n) / nk;
                st.means[c][j] = mean;
                st.variances[c][j] = std::max(
                    opt.variance_floor,
                    simd::weighted_sq_dev(log_resp[c].data(), data.cols[j].data(), mean, n) / nk);
            }
        }
        if (reseeded) {
            // Weights may no longer sum to 1 after a re-seed; renormalize.
            double total = 0.0;
            for (double w : st.weights) total += w;
            for (double& w : st.weights) w /= total;
            prev_ll = -std::numeric_limits<double>::infinity();
            continue;
        }

        if (iter > 0 && ll - prev_ll < opt.tol * std::max(1.0, std::fabs(prev_ll))) {
            res.log_likelihood = ll;
            return res;
        }
        prev_ll = ll;
    }
    res.log_likelihood = prev_ll;
    return res;
}

}  // namespace

GmmModel fit_gmm(const std::vector<std::vector<double>>& data, const GmmFitOptions& options,
                 GmmFitReport* report) {
    if (data.empty()) throw ValidationError("cluster", "empty data");
    if (static_cast<int>(data.size()) <= options.k)
        throw ValidationError("cluster", "need more points than components");
    for (const auto& row : data)
        for (double v : row)
            if (!std::isfinite(v)) throw ValidationError("cluster", "non-finite data value");

    const Columns cols(data);
    std::vector<RestartResult> results(options.n_init);
    parallel_for(options.n_init, [&](std::size_t r) {
        results[r] = run_em(data, cols, options, derive_seed(options.seed, "gmm-restart", r));
    });

    int best = 0;
    for (int r = 1; r < options.n_init; ++r)
        if (results[r].log_likelihood > results[best].log_likelihood) best = r;

    if (report != nullptr) {
        report->restart_traces.clear();
        report->restart_reseeds.clear();
        for (const auto& r : results) {
            report->restart_traces.push_back(r.trace);
            report->restart_reseeds.push_back(r.reseeds);
        }
        report->best_restart = best;
    }

    GmmModel model;
    model.k = options.k;
    model.dim = static_cast<int>(cols.d);
    model.weights = results[best].state.weights;
    model.means = results[best].state.means;
    model.variances = results[best].state.variances;
    model.log_likelihood = results[best].log_likelihood;
    model.seed = options.seed;
    return model;
}

std::vector<ClusterAssignment> assign(const GmmModel& model,
                                      const std::vector<std::vector<double>>& data,
                                      const std::vector<std::string>& lesion_ids) {
    std::vector<ClusterAssignment> out;
    if (data.empty()) return out;
    if (static_cast<int>(data[0].size()) != model.dim)
        throw ValidationError("cluster", "dimension mismatch",
                              std::to_string(data[0].size()) + " vs model dim " +
                                  std::to_string(model.dim));
    const Columns cols(data);
    const std::size_t n = cols.n;
    std::vector<std::vector<double>> log_dens(model.k, std::vector<double>(n));
    for (int c = 0; c < model.k; ++c)
        component_log_density(cols, model.means[c], model.variances[c],
                              std::log(model.weights[c]), log_dens[c]);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = log_dens[0][i];
        for (int c = 1; c < model.k; ++c) mx = std::max(mx, log_dens[c][i]);
        double sum = 0.0;
        for (int c = 0; c < model.k; ++c) sum += std::exp(log_dens[c][i] - mx);
        const double lse = mx + std::log(sum);
        ClusterAssignment a;
        a.lesion_id = i < lesion_ids.size() ? lesion_ids[i] : "";
        a.responsibilities.resize(model.k);
        for (int c = 0; c < model.k; ++c)
            a.responsibilities[c] = std::exp(log_dens[c][i] - lse);
        a.cluster = 0;
        for (int c = 1; c < model.k; ++c)
            if (a.responsibilities[c] > a.responsibilities[a.cluster]) a.cluster = c;
        out.push_back(std::move(a));
    }
    return out;
}

ClusterProfiles cluster_profiles(const GmmModel& model,
                                 const std::vector<std::vector<double>>& data,
                                 const std::vector<ClusterAssignment>& assignments,
                                 const std::vector<ResponseCategory>& t6_categories) {
    if (data.size() != assignments.size() || data.size() != t6_categories.size())
        throw ValidationError("cluster", "profiles input sizes do not match");
    ClusterProfiles p;
    p.mean_trajectories.assign(model.k, std::vector<double>(model.dim + 1, 0.0));
    p.t6_histograms.assign(model.k, {});
    p.empty.assign(model.k, false);
    std::vector<long long> counts(model.k, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int c = assignments[i].cluster;
        counts[c] += 1;
        for (int j = 0; j < model.dim; ++j) p.mean_trajectories[c][j + 1] += data[i][j];
        p.t6_histograms[c][static_cast<int>(t6_categories[i])] += 1;
    }
    for (int c = 0; c < model.k; ++c) {
        if (counts[c] == 0) {
            p.empty[c] = true;
            p.warnings.push_back("cluster " + std::to_string(c) +
                                 " has no members; profile omitted");
            continue;
        }
        p.mean_trajectories[c][0] = 1.0;
        for (int j = 1; j <= model.dim; ++j)
            p.mean_trajectories[c][j] /= static_cast<double>(counts[c]);
    }
    return p;
}

void write_cluster_report(const std::string& path, const GmmModel& model,
                          const std::vector<ClusterAssignment>& assignments,
                          const ClusterProfiles& profiles) {
    nlohmann::json j;
    j["model"] = {{"k", model.k},
                  {"dim", model.dim},
                  {"weights", model.weights},
                  {"means", model.means},
                  {"variances", model.variances},
                  {"log_likelihood", model.log_likelihood},
                  {"seed", model.seed}};
    auto& arr = j["assignments"] = nlohmann::json::array();
    for (const auto& a : assignments) {
        arr.push_back({{"lesion_id", a.lesion_id},
                       {"cluster", a.cluster},
                       {"responsibilities", a.responsibilities}});
    }
    auto& profs = j["profiles"] = nlohmann::json::array();
    for (int c = 0; c < model.k; ++c) {
        nlohmann::json entry;
        entry["cluster"] = c;
        entry["empty"] = static_cast<bool>(profiles.empty[c]);
        if (!profiles.empty[c]) {
            entry["mean_trajectory"] = profiles.mean_trajectories[c];
            entry["t6_histogram"] = {{"CR", profiles.t6_histograms[c][0]},
                                     {"PR", profiles.t6_histograms[c][1]},
                                     {"SD", profiles.t6_histograms[c][2]},
                                     {"PD", profiles.t6_histograms[c][3]}};
        }
        profs.push_back(std::move(entry));
    }
    if (!profiles.warnings.empty()) j["warnings"] = profiles.warnings;

    std::ofstream out(path);
    if (!out) throw IoError("cluster", "cannot write file", path);
    out << j.dump(2) << '\n';
}

}  // namespace bmt
