#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmt/types.hpp"

namespace bmt {

// Per-lesion temporal graph: nodes are time points, edges run from later to
// earlier nodes ("directed to past") with normalized time deltas, plus one
// self-loop per node (delta 0). Fully connected among included nodes.
struct TemporalGraph {
    struct Node {
        int time_index = 0;
        std::vector<double> features;
    };
    struct Edge {
        int src = 0;  // index into nodes
        int dst = 0;
        double delta = 0.0;  // (day_src - day_dst) / 360
    };

    std::vector<Node> nodes;
    std::vector<Edge> edges;
    int label = 0;
    int horizon = 0;  // max time index present
};

// Node k feature = per-point features at t_k concatenated with the clinical
// vector (replicated per node).
TemporalGraph build_graph(const std::vector<std::vector<double>>& point_features,
                          const std::vector<double>& clinical, int label);

// Keep nodes with time_index <= horizon and the edges among them.
TemporalGraph crop_graph(const TemporalGraph& g, int horizon);

// Single attention layer + linear head.
struct GatParams {
    int input_dim = 0;
    int hidden = 16;
    double leaky_slope = 0.2;
    std::vector<double> w;       // hidden x input_dim, row-major; z_i = W x_i
    std::vector<double> attn;    // 2*hidden + 1: [attending z | attended z | delta]
    std::vector<double> head_w;  // hidden
    double head_b = 0.0;

    std::size_t n_params() const { return w.size() + attn.size() + head_w.size() + 1; }
    std::vector<double> flat() const;
    static GatParams from_flat(const std::vector<double>& v, int input_dim, int hidden,
                               double leaky_slope);
};

struct GatForward {
    double probability = 0.0;
    // attention[i][j] = alpha_ij over canonical (time-sorted) node indices;
    // zero outside the neighbor set. Every row sums to 1.
    std::vector<std::vector<double>> attention;
};

GatForward gat_forward(const GatParams& params, const TemporalGraph& g);

// Exact gradient of the weighted binary cross-entropy at one graph, flattened
// in GatParams::flat() order.
std::vector<double> gat_backward(const GatParams& params, const TemporalGraph& g, int label,
                                 double class_weight, double* loss_out = nullptr);

enum class GatMode { time_specific, general };

struct TrainConfig {
    double lr0 = 0.0001;
    int restart_period = 50;  // cosine-annealing warm-restart period (epochs)
    int max_epochs = 1000;
    int patience = 20;
    GatMode mode = GatMode::general;
    int horizon = 5;  // time_specific only
    double val_fraction = 0.2;
    int hidden = 16;
    int batch_size = 16;  // 0 = full batch; batches are seeded per-epoch shuffles
    double init_scale = 0.1;  // uniform init half-width
    uint64_t seed = 0;
};

struct TrainLogEntry {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_auc = 0.0;  // -1 when the validation split is single-class
};

struct TrainedGat {
    GatParams params;
    GatMode mode = GatMode::general;
    int horizon = 5;  // trained horizon for time_specific; 5 for general
    int best_epoch = 0;
    std::vector<TrainLogEntry> log;
};

// Full-batch Adam with cosine-annealing warm restarts and early stopping on a
// stratified validation split. general mode crops every sample to a uniformly
// drawn horizon each epoch; time_specific crops all samples to cfg.horizon.
// Bitwise reproducible given the seed and graph order.
TrainedGat gat_train(const std::vector<TemporalGraph>& graphs, const TrainConfig& cfg);

// Crop to t0..tN and run the forward pass. time_specific models only serve
// their trained horizon.
std::vector<double> gat_predict(const TrainedGat& model, const std::vector<TemporalGraph>& graphs,
                                int horizon);

void write_gat_json(const std::string& path, const TrainedGat& model);
TrainedGat read_gat_json(const std::string& path);
void write_train_log_csv(const std::string& path, const std::vector<TrainLogEntry>& log);

}  // namespace bmt
