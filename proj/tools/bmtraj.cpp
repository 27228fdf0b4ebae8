// bmtraj: longitudinal brain-metastasis trajectory analysis pipeline.
// Subcommands compose through CSV/JSON files only; every run echoes its fully
// materialized configuration next to the outputs.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "bmt/cli.hpp"
#include "bmt/errors.hpp"

namespace {

using namespace bmt::cli;

void add_common(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--threads", c.threads, "Worker thread cap (0 = available parallelism)");
    sub->add_option("--simd", c.simd, "Kernel selection: auto | scalar | avx2");
}

// The --config JSON (echoed schema) is applied before flag parsing, so
// explicit flags override file values.
std::string prescan_config(int argc, char** argv, const std::string& subcmd) {
    bool in_sub = false;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == subcmd) in_sub = true;
        if (!in_sub) continue;
        if (a == "--config" && i + 1 < argc) return argv[i + 1];
        if (a.rfind("--config=", 0) == 0) return a.substr(9);
    }
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bmtraj: lesion trajectory tracking, response classification and prediction"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(0, 1);

    SynthOpts synth_opts;
    IngestOpts ingest_opts;
    QcOpts qc_opts;
    TrackOpts track_opts;
    ResampleOpts resample_opts;
    ClassifyOpts classify_opts;
    FlowsOpts flows_opts;
    ClusterOpts cluster_opts;
    FeaturesOpts features_opts;
    TrainOpts train_opts;
    EvaluateOpts evaluate_opts;
    ReportOpts report_opts;
    std::string config_placeholder;

    try {
        if (std::string p = prescan_config(argc, argv, "synth"); !p.empty())
            synth_opts = load_config<SynthOpts>(p);
        if (std::string p = prescan_config(argc, argv, "ingest"); !p.empty())
            ingest_opts = load_config<IngestOpts>(p);
        if (std::string p = prescan_config(argc, argv, "qc"); !p.empty())
            qc_opts = load_config<QcOpts>(p);
        if (std::string p = prescan_config(argc, argv, "track"); !p.empty())
            track_opts = load_config<TrackOpts>(p);
        if (std::string p = prescan_config(argc, argv, "resample"); !p.empty())
            resample_opts = load_config<ResampleOpts>(p);
        if (std::string p = prescan_config(argc, argv, "classify"); !p.empty())
            classify_opts = load_config<ClassifyOpts>(p);
        if (std::string p = prescan_config(argc, argv, "flows"); !p.empty())
            flows_opts = load_config<FlowsOpts>(p);
        if (std::string p = prescan_config(argc, argv, "cluster"); !p.empty())
            cluster_opts = load_config<ClusterOpts>(p);
        if (std::string p = prescan_config(argc, argv, "features"); !p.empty())
            features_opts = load_config<FeaturesOpts>(p);
        if (std::string p = prescan_config(argc, argv, "train"); !p.empty())
            train_opts = load_config<TrainOpts>(p);
        if (std::string p = prescan_config(argc, argv, "evaluate"); !p.empty())
            evaluate_opts = load_config<EvaluateOpts>(p);
        if (std::string p = prescan_config(argc, argv, "report"); !p.empty())
            report_opts = load_config<ReportOpts>(p);
    } catch (const bmt::IoError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const bmt::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    int exit_code = 0;
    auto guard = [&exit_code](auto&& fn) {
        try {
            exit_code = fn();
        } catch (const bmt::IoError& e) {
            std::cerr << e.what() << "\n";
            exit_code = 2;
        } catch (const bmt::ValidationError& e) {
            std::cerr << e.what() << "\n";
            exit_code = 1;
        } catch (const std::exception& e) {
            std::cerr << "bmtraj: " << e.what() << "\n";
            exit_code = 1;
        }
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic lesion cohort");
    add_common(synth, synth_opts.common);
    synth->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    synth->add_option("--n", synth_opts.n, "Number of lesions");
    synth->add_option("--seed", synth_opts.seed, "Master seed");
    synth->add_option("--noise", synth_opts.noise_scale, "Noise scale (0 = noise-free)");
    synth->add_option("--out-dir", synth_opts.out_dir, "Output directory");
    synth->callback([&] { guard([&] { return cmd_synth(synth_opts); }); });

    auto* ingest = app.add_subcommand("ingest", "Parse and validate a trajectory table");
    add_common(ingest, ingest_opts.common);
    ingest->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    ingest->add_option("--trajectories", ingest_opts.trajectories, "Trajectory CSV");
    ingest->add_option("--out", ingest_opts.out, "Canonical trajectory CSV output");
    ingest->callback([&] { guard([&] { return cmd_ingest(ingest_opts); }); });

    auto* qc = app.add_subcommand("qc", "Apply cohort criteria and flag suspicious trajectories");
    add_common(qc, qc_opts.common);
    qc->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    qc->add_option("--trajectories", qc_opts.trajectories, "Trajectory CSV");
    qc->add_option("--out-dir", qc_opts.out_dir, "Output directory");
    qc->add_flag("--include-flagged", qc_opts.include_flagged,
                 "Keep flagged trajectories in kept.csv");
    qc->add_option("--max-mean-interval", qc_opts.max_mean_interval_days,
                   "Max mean inter-scan interval (days)");
    qc->add_option("--min-observation", qc_opts.min_observation_days,
                   "Min observation span (days)");
    qc->add_option("--max-gap", qc_opts.max_gap_days, "Max inter-scan gap (days)");
    qc->add_option("--rebound-fraction", qc_opts.rebound_fraction,
                   "CR-swing rebound threshold (fraction of baseline)");
    qc->add_option("--rebound-count", qc_opts.rebound_count,
                   "CR-swing consecutive rebound count");
    qc->callback([&] { guard([&] { return cmd_qc(qc_opts); }); });

    auto* track = app.add_subcommand("track", "Extract and match lesions across label volumes");
    add_common(track, track_opts.common);
    track->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    track->add_option("--manifest", track_opts.manifest, "Series manifest CSV");
    track->add_option("--out-dir", track_opts.out_dir, "Output directory");
    track->add_option("--max-centroid-mm", track_opts.max_centroid_mm,
                      "Centroid fallback distance for zero-overlap matches");
    track->add_flag("!--no-shape-features", track_opts.shape_features,
                    "Skip built-in mask-shape features");
    track->callback([&] { guard([&] { return cmd_track(track_opts); }); });

    auto* resample = app.add_subcommand("resample", "Map trajectories onto the 7-point grid");
    add_common(resample, resample_opts.common);
    resample->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    resample->add_option("--trajectories", resample_opts.trajectories, "Trajectory CSV");
    resample->add_option("--out-dir", resample_opts.out_dir, "Output directory");
    resample->add_option("--method", resample_opts.method, "nn | linear | bspline");
    resample->add_flag("--impute", resample_opts.impute, "Impute isolated zero dips");
    resample->callback([&] { guard([&] { return cmd_resample(resample_opts); }); });

    auto* classify = app.add_subcommand("classify", "Volumetric response categories at t1..t6");
    add_common(classify, classify_opts.common);
    classify->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    classify->add_option("--trajectories", classify_opts.trajectories,
                         "Trajectory CSV (resampled internally)");
    classify->add_option("--resampled", classify_opts.resampled, "Resampled volume CSV");
    classify->add_option("--out", classify_opts.out, "Category CSV output");
    classify->add_flag("!--no-impute", classify_opts.impute, "Skip zero-dip imputation");
    classify->add_option("--pr-fraction", classify_opts.pr_fraction,
                         "PR threshold (fraction of baseline)");
    classify->add_option("--pd-fraction", classify_opts.pd_fraction,
                         "PD threshold (fraction of nadir)");
    classify->add_option("--cr-volume", classify_opts.cr_volume_mm3,
                         "CR volume cutoff (mm^3)");
    classify->callback([&] { guard([&] { return cmd_classify(classify_opts); }); });

    auto* flows = app.add_subcommand("flows", "Response-transition flow matrices");
    add_common(flows, flows_opts.common);
    flows->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    flows->add_option("--classified", flows_opts.classified, "classify output CSV");
    flows->add_option("--out-dir", flows_opts.out_dir, "Output directory");
    flows->callback([&] { guard([&] { return cmd_flows(flows_opts); }); });

    auto* cluster = app.add_subcommand("cluster", "Mixture clustering of normalized trajectories");
    add_common(cluster, cluster_opts.common);
    cluster->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    cluster->add_option("--trajectories", cluster_opts.trajectories, "Trajectory CSV");
    cluster->add_option("--out", cluster_opts.out, "Cluster report JSON output");
    cluster->add_option("-k,--k", cluster_opts.k, "Cluster count");
    cluster->add_option("--n-init", cluster_opts.n_init, "EM restarts");
    cluster->add_option("--max-iter", cluster_opts.max_iter, "EM iteration cap");
    cluster->add_option("--tol", cluster_opts.tol, "Relative log-likelihood tolerance");
    cluster->add_option("--seed", cluster_opts.seed, "Seed");
    cluster->add_flag("!--no-impute", cluster_opts.impute, "Skip zero-dip imputation");
    cluster->callback([&] { guard([&] { return cmd_cluster(cluster_opts); }); });

    auto* features = app.add_subcommand("features", "Assemble the prediction feature matrix");
    add_common(features, features_opts.common);
    features->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    features->add_option("--trajectories", features_opts.trajectories, "Trajectory CSV");
    features->add_option("--clinical", features_opts.clinical, "Clinical CSV (long format)");
    features->add_option("--out-dir", features_opts.out_dir, "Output directory");
    features->add_option("--horizon", features_opts.horizon, "Last time point (0..5)");
    features->add_option("--include", features_opts.include,
                         "Comma list: volume,shape,injected,clinical");
    features->add_flag("!--no-impute", features_opts.impute, "Skip zero-dip imputation");
    features->add_flag("--standardize", features_opts.standardize,
                       "Also write standardized matrix + params");
    features->callback([&] { guard([&] { return cmd_features(features_opts); }); });

    auto* train = app.add_subcommand("train", "Fit one model on a full feature matrix");
    add_common(train, train_opts.common);
    train->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    train->add_option("--features", train_opts.features, "Feature CSV");
    train->add_option("--categories", train_opts.categories, "classify output CSV");
    train->add_option("--task", train_opts.task, "cr | resp");
    train->add_option("--method", train_opts.method, "gbdt | gat-specific | gat-general");
    train->add_option("--horizon", train_opts.horizon, "Horizon for gat-specific");
    train->add_option("--seed", train_opts.seed, "Seed");
    train->add_option("--out-dir", train_opts.out_dir, "Output directory");
    train->add_option("--gbdt-rounds", train_opts.gbdt_rounds, "Boosting rounds");
    train->add_option("--gbdt-depth", train_opts.gbdt_depth, "Tree depth");
    train->add_option("--gbdt-lr", train_opts.gbdt_lr, "Boosting learning rate");
    train->add_option("--gat-hidden", train_opts.gat_hidden, "Attention hidden width");
    train->add_option("--gat-max-epochs", train_opts.gat_max_epochs, "Epoch cap");
    train->add_option("--gat-patience", train_opts.gat_patience, "Early-stop patience");
    train->add_option("--gat-lr0", train_opts.gat_lr0, "Initial learning rate");
    train->add_option("--gat-batch", train_opts.gat_batch, "Mini-batch size (0 = full batch)");
    train->add_option("--gat-init", train_opts.gat_init, "Uniform init half-width");
    train->callback([&] { guard([&] { return cmd_train(train_opts); }); });

    auto* evaluate = app.add_subcommand("evaluate", "Cross-validated response prediction");
    add_common(evaluate, evaluate_opts.common);
    evaluate->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    evaluate->add_option("--trajectories", evaluate_opts.trajectories, "Trajectory CSV");
    evaluate->add_option("--clinical", evaluate_opts.clinical, "Clinical CSV (long format)");
    evaluate->add_option("--out-dir", evaluate_opts.out_dir, "Output directory");
    evaluate->add_option("--task", evaluate_opts.task, "cr | resp");
    evaluate->add_option("--method", evaluate_opts.methods,
                         "Comma list: gbdt,gat-specific,gat-general");
    evaluate->add_option("--horizons", evaluate_opts.horizons, "Comma list of horizons");
    evaluate->add_option("--include", evaluate_opts.include,
                         "Comma list: volume,shape,injected,clinical");
    evaluate->add_option("--folds", evaluate_opts.folds, "Cross-validation folds");
    evaluate->add_flag("!--ungrouped", evaluate_opts.grouped,
                       "Lesion-level folds (no patient grouping)");
    evaluate->add_flag("!--no-impute", evaluate_opts.impute, "Skip zero-dip imputation");
    evaluate->add_flag("--include-flagged", evaluate_opts.include_flagged,
                       "Keep QC-flagged trajectories");
    evaluate->add_option("--n-boot", evaluate_opts.n_boot, "Bootstrap resamples");
    evaluate->add_option("--n-perm", evaluate_opts.n_perm, "Permutation iterations");
    evaluate->add_option("--seed", evaluate_opts.seed, "Master seed");
    evaluate->add_option("--gbdt-rounds", evaluate_opts.gbdt_rounds, "Boosting rounds");
    evaluate->add_option("--gbdt-depth", evaluate_opts.gbdt_depth, "Tree depth");
    evaluate->add_option("--gbdt-lr", evaluate_opts.gbdt_lr, "Boosting learning rate");
    evaluate->add_option("--gat-hidden", evaluate_opts.gat_hidden, "Attention hidden width");
    evaluate->add_option("--gat-max-epochs", evaluate_opts.gat_max_epochs, "Epoch cap");
    evaluate->add_option("--gat-patience", evaluate_opts.gat_patience, "Early-stop patience");
    evaluate->add_option("--gat-lr0", evaluate_opts.gat_lr0, "Initial learning rate");
    evaluate->add_option("--gat-batch", evaluate_opts.gat_batch, "Mini-batch size (0 = full batch)");
    evaluate->add_option("--gat-init", evaluate_opts.gat_init, "Uniform init half-width");
    evaluate->callback([&] { guard([&] { return cmd_evaluate(evaluate_opts); }); });

    auto* report = app.add_subcommand("report", "Aggregate analysis outputs into one bundle");
    add_common(report, report_opts.common);
    report->add_option("--config", config_placeholder, "JSON config (echoed schema)");
    report->add_option("--cluster", report_opts.cluster_report, "Cluster report JSON");
    report->add_option("--flows", report_opts.flows_report, "Flows JSON");
    report->add_option("--eval", report_opts.eval_report, "Evaluation report JSON");
    report->add_option("--out-dir", report_opts.out_dir, "Output directory");
    report->callback([&] { guard([&] { return cmd_report(report_opts); }); });

    CLI11_PARSE(app, argc, argv);
    if (app.get_subcommands().empty()) {
        std::cout << app.help();
        return 0;
    }
    return exit_code;
}
