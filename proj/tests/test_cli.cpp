#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bmt/cli.hpp"
#include "bmt/errors.hpp"
#include "bmt/ingest.hpp"
#include "bmt/synthgen.hpp"
#include "bmt/track.hpp"

using namespace bmt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& child) const { return (path / child).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(BMTRAJ_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

cli::SynthOpts synth_into(const std::string& dir, std::size_t n = 80, uint64_t seed = 42) {
    cli::SynthOpts opts;
    opts.n = n;
    opts.seed = seed;
    opts.out_dir = dir;
    return opts;
}

}  // namespace

TEST_CASE("synth then the full file pipeline") {
    TempDir tmp("bmt_cli_pipeline");
    REQUIRE(cli::cmd_synth(synth_into(tmp / "synth")) == 0);
    CHECK(fs::exists(tmp / "synth/trajectories.csv"));
    CHECK(fs::exists(tmp / "synth/labels.csv"));
    CHECK(fs::exists(tmp / "synth/clinical.csv"));
    CHECK(fs::exists(tmp / "synth/synth.config.json"));

    cli::IngestOpts ingest;
    ingest.trajectories = tmp / "synth/trajectories.csv";
    ingest.out = tmp / "clean.csv";
    REQUIRE(cli::cmd_ingest(ingest) == 0);

    cli::QcOpts qc;
    qc.trajectories = tmp / "clean.csv";
    qc.out_dir = tmp / "qc";
    REQUIRE(cli::cmd_qc(qc) == 0);
    CHECK(fs::exists(tmp / "qc/flags.csv"));
    CHECK(fs::exists(tmp / "qc/kept.csv"));

    cli::ResampleOpts resample;
    resample.trajectories = tmp / "qc/kept.csv";
    resample.out_dir = tmp / "res";
    REQUIRE(cli::cmd_resample(resample) == 0);
    CHECK(fs::exists(tmp / "res/resampled.csv"));
    CHECK(fs::exists(tmp / "res/normalized.csv"));

    cli::ClassifyOpts classify;
    classify.trajectories = tmp / "qc/kept.csv";
    classify.out = tmp / "categories.csv";
    REQUIRE(cli::cmd_classify(classify) == 0);

    cli::FlowsOpts flows;
    flows.classified = tmp / "categories.csv";
    flows.out_dir = tmp / "flows";
    REQUIRE(cli::cmd_flows(flows) == 0);
    CHECK(fs::exists(tmp / "flows/flows.json"));
    CHECK(fs::exists(tmp / "flows/flows.csv"));

    cli::ClusterOpts cluster;
    cluster.trajectories = tmp / "qc/kept.csv";
    cluster.out = tmp / "cluster.json";
    cluster.seed = 1;
    REQUIRE(cli::cmd_cluster(cluster) == 0);

    cli::FeaturesOpts features;
    features.trajectories = tmp / "qc/kept.csv";
    features.clinical = tmp / "synth/clinical.csv";
    features.include = "volume,injected,clinical";
    features.out_dir = tmp / "feat";
    features.standardize = true;
    REQUIRE(cli::cmd_features(features) == 0);
    CHECK(fs::exists(tmp / "feat/features.csv"));
    CHECK(fs::exists(tmp / "feat/standardization.json"));

    cli::TrainOpts train;
    train.features = tmp / "feat/features.csv";
    train.categories = tmp / "categories.csv";
    train.method = "gbdt";
    train.out_dir = tmp / "model";
    REQUIRE(cli::cmd_train(train) == 0);
    CHECK(fs::exists(tmp / "model/model.json"));

    cli::EvaluateOpts evaluate;
    evaluate.trajectories = tmp / "qc/kept.csv";
    evaluate.out_dir = tmp / "eval";
    evaluate.methods = "gbdt";
    evaluate.include = "volume,injected";
    evaluate.n_boot = 50;
    evaluate.n_perm = 50;
    evaluate.seed = 1;
    REQUIRE(cli::cmd_evaluate(evaluate) == 0);
    CHECK(fs::exists(tmp / "eval/eval_report.json"));
    CHECK(fs::exists(tmp / "eval/eval_report.csv"));
    CHECK(fs::exists(tmp / "eval/pooled_scores.csv"));

    cli::ReportOpts report;
    report.cluster_report = tmp / "cluster.json";
    report.flows_report = tmp / "flows/flows.json";
    report.eval_report = tmp / "eval/eval_report.json";
    report.out_dir = tmp / "bundle";
    REQUIRE(cli::cmd_report(report) == 0);
    CHECK(fs::exists(tmp / "bundle/bundle.json"));
    CHECK(fs::exists(tmp / "bundle/auc_table.csv"));
    CHECK(fs::exists(tmp / "bundle/profiles.csv"));
    CHECK(fs::exists(tmp / "bundle/flows.csv"));
}

TEST_CASE("seeded runs are byte identical") {
    TempDir tmp("bmt_cli_determinism");
    REQUIRE(cli::cmd_synth(synth_into(tmp / "a")) == 0);
    REQUIRE(cli::cmd_synth(synth_into(tmp / "b")) == 0);
    CHECK(slurp(tmp / "a/trajectories.csv") == slurp(tmp / "b/trajectories.csv"));
    CHECK(slurp(tmp / "a/labels.csv") == slurp(tmp / "b/labels.csv"));
    CHECK(slurp(tmp / "a/clinical.csv") == slurp(tmp / "b/clinical.csv"));
}

TEST_CASE("echoed configs reproduce runs") {
    TempDir tmp("bmt_cli_echo");
    REQUIRE(cli::cmd_synth(synth_into(tmp / "synth")) == 0);

    cli::FeaturesOpts features;
    features.trajectories = tmp / "synth/trajectories.csv";
    features.out_dir = tmp / "feat1";
    REQUIRE(cli::cmd_features(features) == 0);

    auto echoed = cli::load_config<cli::FeaturesOpts>(tmp / "feat1/features.config.json");
    echoed.out_dir = tmp / "feat2";
    REQUIRE(cli::cmd_features(echoed) == 0);
    CHECK(slurp(tmp / "feat1/features.csv") == slurp(tmp / "feat2/features.csv"));
}

TEST_CASE("unknown config keys are rejected") {
    TempDir tmp("bmt_cli_badcfg");
    const std::string path = tmp / "bad.json";
    {
        std::ofstream out(path);
        out << R"({"n": 50, "sede": 42})";
    }
    CHECK_THROWS_WITH_AS(cli::load_config<cli::SynthOpts>(path), doctest::Contains("sede"),
                         ValidationError);
}

TEST_CASE("binary honors --config with flag overrides") {
    TempDir tmp("bmt_cli_cfgbin");
    REQUIRE(run_binary("synth --n 40 --seed 5 --out-dir " + (tmp / "first")) == 0);
    // Rerun from the echoed config into a new directory; everything else
    // (n, seed) comes from the file.
    REQUIRE(run_binary("synth --config " + (tmp / "first/synth.config.json") +
                       " --out-dir " + (tmp / "second")) == 0);
    CHECK(slurp(tmp / "first/trajectories.csv") == slurp(tmp / "second/trajectories.csv"));
    // A rejected config key fails validation through the binary too.
    {
        std::ofstream out(tmp / "bad.json");
        out << R"({"n": 40, "bogus": 1})";
    }
    CHECK(run_binary("synth --config " + (tmp / "bad.json") + " --out-dir " +
                     (tmp / "third")) == 1);
}

TEST_CASE("binary exit codes follow the error envelope") {
    TempDir tmp("bmt_cli_exit");
    CHECK(run_binary("--version") == 0);
    CHECK(run_binary("synth --n 40 --seed 1 --out-dir " + (tmp / "ok")) == 0);
    // Validation failure: malformed trajectory table.
    {
        std::ofstream out(tmp / "bad.csv");
        out << "patient_id,lesion_id,day,volume_mm3\nP1,L1,0,-4\n";
    }
    CHECK(run_binary("ingest --trajectories " + (tmp / "bad.csv")) == 1);
    // IO failure: missing input file.
    CHECK(run_binary("ingest --trajectories " + (tmp / "missing.csv")) == 2);
    // Unknown flag is a CLI parse error.
    CHECK(run_binary("synth --does-not-exist") != 0);
}

TEST_CASE("track subcommand consumes a sphere-mask manifest") {
    TempDir tmp("bmt_cli_track");
    // Two time points, one stable sphere.
    GridInfo grid{{16, 16, 16}, {1, 1, 1}, {0, 0, 0}};
    for (int k = 0; k < 2; ++k) {
        const auto vol = sphere_mask_volume(grid, {{{8, 8, 8}, 4.0, 1}});
        write_label_volume(tmp / ("t" + std::to_string(k) + ".json"),
                           tmp / ("t" + std::to_string(k) + ".raw"), vol);
    }
    {
        std::ofstream manifest(tmp / "manifest.csv");
        manifest << "patient_id,day,volume_path,sidecar_path\n";
        manifest << "P1,0,t0.raw,t0.json\n";
        manifest << "P1,60,t1.raw,t1.json\n";
    }
    cli::TrackOpts track;
    track.manifest = tmp / "manifest.csv";
    track.out_dir = tmp / "out";
    REQUIRE(cli::cmd_track(track) == 0);
    const auto trajs = read_trajectory_csv(tmp / "out/trajectories.csv");
    REQUIRE(trajs.size() == 1);
    CHECK(trajs[0].records.size() == 2);
    CHECK(trajs[0].records[0].volume_mm3 == trajs[0].records[1].volume_mm3);
    CHECK(trajs[0].records[0].features.count("shape_sphericity") == 1);
}
