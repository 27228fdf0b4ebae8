#include "bmt/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "bmt/errors.hpp"

namespace bmt {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_labels(const std::vector<int>& labels) {
    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        if (y == 1) has_pos = true;
        else if (y == 0) has_neg = true;
        else throw ValidationError("gbdt", "labels must be 0 or 1");
    }
    if (!has_pos || !has_neg)
        throw ValidationError("gbdt", "both classes must be present in the labels");
}

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

double leaf_gain(double g, double h, double lambda) { return g * g / (h + lambda); }

struct TreeBuilder {
    const FeatureMatrix& features;
    const std::vector<std::vector<std::size_t>>& sorted_rows;  // per feature
    const std::vector<double>& grad;
    const std::vector<double>& hess;
    const GbdtConfig& cfg;
    GbdtTree tree;

    // in_node[r] marks membership of the node being split.
    std::vector<char> in_node;

    int build(const std::vector<std::size_t>& rows, int depth) {
        double g_total = 0.0, h_total = 0.0;
        for (std::size_t r : rows) {
            g_total += grad[r];
            h_total += hess[r];
        }

        const int node_index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        SplitChoice best;
        if (depth < cfg.max_depth) best = find_split(rows, g_total, h_total);

        if (best.feature < 0 || best.gain <= 0.0) {
            tree.nodes[node_index].is_leaf = true;
            tree.nodes[node_index].leaf_value =
                -g_total / (h_total + cfg.l2_lambda) * cfg.learning_rate;
            return node_index;
        }

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            if (features.columns[best.feature].values[r] < best.threshold)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }
        const int left = build(left_rows, depth + 1);
        const int right = build(right_rows, depth + 1);
        auto& node = tree.nodes[node_index];
        node.is_leaf = false;
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left;
        node.right = right;
        return node_index;
    }

    SplitChoice find_split(const std::vector<std::size_t>& rows, double g_total,
                           double h_total) {
        SplitChoice best;
        std::fill(in_node.begin(), in_node.end(), 0);
        for (std::size_t r : rows) in_node[r] = 1;
        const double parent_gain = leaf_gain(g_total, h_total, cfg.l2_lambda);

        for (std::size_t f = 0; f < features.n_cols(); ++f) {
            const auto& values = features.columns[f].values;
            double g_left = 0.0, h_left = 0.0;
            double prev_value = 0.0;
            bool have_prev = false;
            for (std::size_t idx : sorted_rows[f]) {
                if (!in_node[idx]) continue;
                const double v = values[idx];
                if (have_prev && v != prev_value) {
                    // Candidate boundary between prev_value and v.
                    const double g_right = g_total - g_left;
                    const double h_right = h_total - h_left;
                    if (h_left >= cfg.min_child_weight && h_right >= cfg.min_child_weight) {
                        const double gain = 0.5 * (leaf_gain(g_left, h_left, cfg.l2_lambda) +
                                                   leaf_gain(g_right, h_right, cfg.l2_lambda) -
                                                   parent_gain);
                        // Strict > keeps the first candidate on ties; features
                        // and thresholds are scanned in ascending order, so
                        // ties resolve to the lowest feature, then threshold.
                        if (gain > best.gain) {
                            best.gain = gain;
                            best.feature = static_cast<int>(f);
                            best.threshold = 0.5 * (prev_value + v);
                        }
                    }
                }
                g_left += grad[idx];
                h_left += hess[idx];
                prev_value = v;
                have_prev = true;
            }
        }
        return best;
    }
};

double tree_output(const GbdtTree& tree, const FeatureMatrix& features, std::size_t row) {
    int node = 0;
    while (!tree.nodes[node].is_leaf) {
        const auto& n = tree.nodes[node];
        node = features.columns[n.feature].values[row] < n.threshold ? n.left : n.right;
    }
    return tree.nodes[node].leaf_value;
}

nlohmann::json node_to_json(const GbdtTree& tree, int index) {
    const auto& n = tree.nodes[index];
    if (n.is_leaf) return {{"leaf", n.leaf_value}};
    return {{"feature", n.feature},
            {"threshold", n.threshold},
            {"left", node_to_json(tree, n.left)},
            {"right", node_to_json(tree, n.right)}};
}

int node_from_json(const nlohmann::json& j, GbdtTree& tree) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.contains("leaf")) {
        tree.nodes[index].is_leaf = true;
        tree.nodes[index].leaf_value = j.at("leaf").get<double>();
        return index;
    }
    const int feature = j.at("feature").get<int>();
    const double threshold = j.at("threshold").get<double>();
    const int left = node_from_json(j.at("left"), tree);
    const int right = node_from_json(j.at("right"), tree);
    auto& n = tree.nodes[index];
    n.is_leaf = false;
    n.feature = feature;
    n.threshold = threshold;
    n.left = left;
    n.right = right;
    return index;
}

}  // namespace

std::vector<double> class_weights(const std::vector<int>& labels) {
    check_labels(labels);
    long long n_pos = 0;
    for (int y : labels) n_pos += y;
    const double n = static_cast<double>(labels.size());
    const double w_pos = n / (2.0 * static_cast<double>(n_pos));
    const double w_neg = n / (2.0 * static_cast<double>(labels.size() - n_pos));
    std::vector<double> w(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) w[i] = labels[i] == 1 ? w_pos : w_neg;
    return w;
}

GbdtModel gbdt_fit(const FeatureMatrix& features, const std::vector<int>& labels,
                   const GbdtConfig& config, GbdtFitTrace* trace) {
    if (features.n_rows() != labels.size())
        throw ValidationError("gbdt", "feature rows do not match label count");
    check_labels(labels);
    for (const auto& col : features.columns)
        for (double v : col.values)
            if (!std::isfinite(v))
                throw ValidationError("gbdt", "non-finite feature value", col.name);

    const std::size_t n = labels.size();
    std::vector<double> weights(n, 1.0);
    if (config.class_balanced) weights = class_weights(labels);

    GbdtModel model;
    model.n_features = features.n_cols();
    const double w_total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double w_pos = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (labels[i] == 1) w_pos += weights[i];
    const double prior = w_pos / w_total;
    model.base_score = std::log(prior / (1.0 - prior));

    // Pre-sorted row order per feature, stable in the row index.
    std::vector<std::vector<std::size_t>> sorted_rows(features.n_cols());
    for (std::size_t f = 0; f < features.n_cols(); ++f) {
        auto& order = sorted_rows[f];
        order.resize(n);
        std::iota(order.begin(), order.end(), 0u);
        const auto& values = features.columns[f].values;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    }

    std::vector<double> margin(n, model.base_score);
    std::vector<double> grad(n), hess(n);
    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0u);

    for (int round = 0; round < config.n_rounds; ++round) {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margin[i]);
            grad[i] = weights[i] * (p - static_cast<double>(labels[i]));
            hess[i] = weights[i] * p * (1.0 - p);
            loss -= weights[i] * (labels[i] == 1 ? std::log(std::max(p, 1e-300))
                                                 : std::log(std::max(1.0 - p, 1e-300)));
        }
        if (trace != nullptr) trace->train_loss.push_back(loss / w_total);

        TreeBuilder builder{features, sorted_rows, grad, hess, config, {}, std::vector<char>(n, 0)};
        builder.build(all_rows, 0);
        for (std::size_t i = 0; i < n; ++i) margin[i] += tree_output(builder.tree, features, i);
        model.trees.push_back(std::move(builder.tree));
    }
    if (trace != nullptr) {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margin[i]);
            loss -= weights[i] * (labels[i] == 1 ? std::log(std::max(p, 1e-300))
                                                 : std::log(std::max(1.0 - p, 1e-300)));
        }
        trace->train_loss.push_back(loss / w_total);
    }
    return model;
}

std::vector<double> gbdt_predict_proba(const GbdtModel& model, const FeatureMatrix& features) {
    if (features.n_cols() != model.n_features)
        throw ValidationError("gbdt", "feature count does not match the trained model",
                              std::to_string(features.n_cols()) + " vs " +
                                  std::to_string(model.n_features));
    std::vector<double> out(features.n_rows());
    for (std::size_t r = 0; r < features.n_rows(); ++r) {
        double margin = model.base_score;
        for (const auto& tree : model.trees) margin += tree_output(tree, features, r);
        out[r] = sigmoid(margin);
    }
    return out;
}

void write_gbdt_json(const std::string& path, const GbdtModel& model) {
    nlohmann::json j;
    j["base_score"] = model.base_score;
    j["n_features"] = model.n_features;
    auto& trees = j["trees"] = nlohmann::json::array();
    for (const auto& tree : model.trees) trees.push_back(node_to_json(tree, 0));
    std::ofstream out(path);
    if (!out) throw IoError("gbdt", "cannot write file", path);
    out << j.dump(2) << '\n';
}

GbdtModel read_gbdt_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("gbdt", "cannot open file", path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("gbdt", std::string("invalid model JSON: ") + e.what(), path);
    }
    GbdtModel model;
    model.base_score = j.at("base_score").get<double>();
    model.n_features = j.at("n_features").get<std::size_t>();
    for (const auto& t : j.at("trees")) {
        GbdtTree tree;
        node_from_json(t, tree);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace bmt
