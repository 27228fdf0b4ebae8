#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmt/types.hpp"

namespace bmt {

// Diagonal-covariance Gaussian mixture over normalized trajectory vectors
// (dimension 6: the grid points t1..t6; t0 is identically 1 and excluded).
struct GmmModel {
    int k = 5;
    int dim = 6;
    std::vector<double> weights;                 // simplex of size k
    std::vector<std::vector<double>> means;      // k x dim
    std::vector<std::vector<double>> variances;  // k x dim, floored
    double log_likelihood = 0.0;
    uint64_t seed = 0;
};

struct GmmFitOptions {
    int k = 5;
    int n_init = 10;
    int max_iter = 500;
    double tol = 1e-6;          // relative log-likelihood improvement
    double variance_floor = 1e-6;
    uint64_t seed = 0;
};

struct GmmFitReport {
    // Per-restart log-likelihood trace, one value per EM iteration. Each trace
    // is non-decreasing (up to fp tolerance) unless a degenerate component was
    // re-seeded, which is recorded separately.
    std::vector<std::vector<double>> restart_traces;
    std::vector<int> restart_reseeds;
    int best_restart = -1;
};

// EM with k-means++ seeded restarts; returns the best restart by final
// log-likelihood (ties to the lowest restart index). Deterministic given the
// data order and seed. Restarts may run concurrently.
GmmModel fit_gmm(const std::vector<std::vector<double>>& data, const GmmFitOptions& options = {},
                 GmmFitReport* report = nullptr);

struct ClusterAssignment {
    std::string lesion_id;
    int cluster = 0;
    std::vector<double> responsibilities;
};

// Responsibilities by Bayes rule in log space; hard label by argmax with ties
// to the lowest index. lesion_ids may be empty (labels left blank).
std::vector<ClusterAssignment> assign(const GmmModel& model,
                                      const std::vector<std::vector<double>>& data,
                                      const std::vector<std::string>& lesion_ids = {});

struct ClusterProfiles {
    // Mean normalized trajectory per cluster with the constant 1 prepended at
    // t0; empty clusters are flagged and omitted from reports.
    std::vector<std::vector<double>> mean_trajectories;  // k x 7
    std::vector<std::array<long long, 4>> t6_histograms;  // per ResponseCategory
    std::vector<bool> empty;
    std::vector<std::string> warnings;
};

ClusterProfiles cluster_profiles(const GmmModel& model,
                                 const std::vector<std::vector<double>>& data,
                                 const std::vector<ClusterAssignment>& assignments,
                                 const std::vector<ResponseCategory>& t6_categories);

// Cluster report JSON: model parameters, per-lesion assignments, profiles and
// t6 response histograms.
void write_cluster_report(const std::string& path, const GmmModel& model,
                          const std::vector<ClusterAssignment>& assignments,
                          const ClusterProfiles& profiles);

}  // namespace bmt
