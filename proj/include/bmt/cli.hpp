#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bmt::cli {

// Subcommand option structs. Every run materializes its full configuration
// (defaults included) into an echoed JSON next to the outputs; rerunning from
// that file reproduces the outputs byte for byte.

inline constexpr const char* kVersion = "bmtraj 0.1.0 (config-schema 1)";

struct CommonOpts {
    unsigned threads = 0;      // 0 = available parallelism
    std::string simd = "auto";  // auto | scalar | avx2

    void apply() const;
};

struct SynthOpts {
    CommonOpts common;
    std::size_t n = 500;
    uint64_t seed = 42;
    double noise_scale = 1.0;
    std::string out_dir;
};
int cmd_synth(const SynthOpts& opts);

struct IngestOpts {
    CommonOpts common;
    std::string trajectories;
    std::string out;
};
int cmd_ingest(const IngestOpts& opts);

struct QcOpts {
    CommonOpts common;
    std::string trajectories;
    std::string out_dir;
    bool include_flagged = false;
    double max_mean_interval_days = 90.0;
    double min_observation_days = 300.0;
    double max_gap_days = 120.0;
    double rebound_fraction = 0.10;
    int rebound_count = 2;
};
int cmd_qc(const QcOpts& opts);

struct TrackOpts {
    CommonOpts common;
    std::string manifest;
    std::string out_dir;
    double max_centroid_mm = 10.0;
    bool shape_features = true;
};
int cmd_track(const TrackOpts& opts);

struct ResampleOpts {
    CommonOpts common;
    std::string trajectories;
    std::string out_dir;
    std::string method = "nn";
    bool impute = false;
};
int cmd_resample(const ResampleOpts& opts);

struct ClassifyOpts {
    CommonOpts common;
    std::string trajectories;  // exactly one of trajectories/resampled
    std::string resampled;
    std::string out;
    bool impute = true;
    double pr_fraction = 0.343;
    double pd_fraction = 1.728;
    double cr_volume_mm3 = 0.0;
};
int cmd_classify(const ClassifyOpts& opts);

struct FlowsOpts {
    CommonOpts common;
    std::string classified;  // classify output CSV
    std::string out_dir;
};
int cmd_flows(const FlowsOpts& opts);

struct ClusterOpts {
    CommonOpts common;
    std::string trajectories;
    std::string out;
    int k = 5;
    int n_init = 10;
    int max_iter = 500;
    double tol = 1e-6;
    uint64_t seed = 0;
    bool impute = true;
};
int cmd_cluster(const ClusterOpts& opts);

struct FeaturesOpts {
    CommonOpts common;
    std::string trajectories;
    std::string clinical;
    std::string out_dir;
    int horizon = 5;
    std::string include = "volume";  // comma list: volume,shape,injected,clinical
    bool impute = true;
    bool standardize = false;
};
int cmd_features(const FeaturesOpts& opts);

struct TrainOpts {
    CommonOpts common;
    std::string features;   // feature CSV (train on all rows)
    std::string categories; // classify output CSV for targets
    std::string task = "resp";
    std::string method = "gbdt";
    int horizon = 5;
    uint64_t seed = 0;
    std::string out_dir;
    // learner knobs
    int gbdt_rounds = 200;
    int gbdt_depth = 3;
    double gbdt_lr = 0.1;
    int gat_hidden = 16;
    int gat_max_epochs = 1000;
    int gat_patience = 20;
    double gat_lr0 = 0.0001;
    int gat_batch = 16;
    double gat_init = 0.1;
};
int cmd_train(const TrainOpts& opts);

struct EvaluateOpts {
    CommonOpts common;
    std::string trajectories;
    std::string clinical;
    std::string out_dir;
    std::string task = "resp";
    std::string methods = "gbdt";  // comma list
    std::string horizons = "0,1,2,3,4,5";
    std::string include = "volume";
    int folds = 5;
    bool grouped = true;
    bool impute = true;
    bool include_flagged = false;
    int n_boot = 1000;
    int n_perm = 1000;
    uint64_t seed = 0;
    int gbdt_rounds = 200;
    int gbdt_depth = 3;
    double gbdt_lr = 0.1;
    int gat_hidden = 16;
    int gat_max_epochs = 1000;
    int gat_patience = 20;
    double gat_lr0 = 0.0001;
    int gat_batch = 16;
    double gat_init = 0.1;
};
int cmd_evaluate(const EvaluateOpts& opts);

struct ReportOpts {
    CommonOpts common;
    std::string cluster_report;  // optional inputs; aggregate what is given
    std::string flows_report;
    std::string eval_report;
    std::string out_dir;
};
int cmd_report(const ReportOpts& opts);

// JSON round-trip for the option structs (unknown keys rejected).
template <typename Opts>
Opts load_config(const std::string& path);
template <typename Opts>
void write_config_echo(const std::string& path, const Opts& opts);

}  // namespace bmt::cli
