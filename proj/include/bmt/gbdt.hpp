#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmt/featspace.hpp"

namespace bmt {

struct GbdtConfig {
    int n_rounds = 200;
    int max_depth = 3;
    double learning_rate = 0.1;
    double min_child_weight = 1.0;  // minimum hessian mass per child
    double l2_lambda = 1.0;
    bool class_balanced = true;
    uint64_t seed = 0;
};

struct GbdtNode {
    bool is_leaf = true;
    double leaf_value = 0.0;
    int feature = -1;
    double threshold = 0.0;
    int left = -1;   // child indices within the tree's node vector
    int right = -1;
};

struct GbdtTree {
    std::vector<GbdtNode> nodes;  // node 0 is the root
};

struct GbdtModel {
    double base_score = 0.0;  // log-odds of the weighted class prior
    std::size_t n_features = 0;
    std::vector<GbdtTree> trees;
};

struct GbdtFitTrace {
    std::vector<double> train_loss;  // weighted logistic loss per round
};

// Balanced per-sample weights: weight(class c) = N / (2 * N_c). Both classes
// must be present.
std::vector<double> class_weights(const std::vector<int>& labels);

// Second-order logistic boosting with exact greedy splits. Deterministic for
// a fixed row order and config (ties break to the lowest feature index, then
// the lowest threshold).
GbdtModel gbdt_fit(const FeatureMatrix& features, const std::vector<int>& labels,
                   const GbdtConfig& config = {}, GbdtFitTrace* trace = nullptr);

std::vector<double> gbdt_predict_proba(const GbdtModel& model, const FeatureMatrix& features);

void write_gbdt_json(const std::string& path, const GbdtModel& model);
GbdtModel read_gbdt_json(const std::string& path);

}  // namespace bmt
