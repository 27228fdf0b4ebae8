#include "bmt/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "bmt/cluster.hpp"
#include "bmt/csv.hpp"
#include "bmt/evalstat.hpp"
#include "bmt/parallel.hpp"
#include "bmt/pipeline.hpp"
#include "bmt/rng.hpp"
#include "bmt/simd.hpp"
#include "bmt/synthgen.hpp"

namespace bmt::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cli", "cannot create output directory", dir);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& stage) {
    if (!j.is_object()) throw ValidationError(stage, "config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (key == "command" || key == "version") continue;  // echo metadata
        if (allowed.count(key) == 0)
            throw ValidationError(stage, "unknown config key", key);
    }
}

json common_to_json(const CommonOpts& c) {
    return {{"threads", c.threads}, {"simd", c.simd}};
}

void common_from_json(const json& j, CommonOpts& c) {
    check_keys(j, {"threads", "simd"}, "config");
    c.threads = j.value("threads", c.threads);
    c.simd = j.value("simd", c.simd);
}

void write_json_file(const std::string& path, const json& j, const char* stage) {
    std::ofstream out(path);
    if (!out) throw IoError(stage, "cannot write file", path);
    out << j.dump(2) << '\n';
}

json read_json_file(const std::string& path, const char* stage) {
    std::ifstream in(path);
    if (!in) throw IoError(stage, "cannot open file", path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(stage, std::string("invalid JSON: ") + e.what(), path);
    }
    return j;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

AssembleOptions parse_include(const std::string& include, int horizon) {
    AssembleOptions a;
    a.horizon = horizon;
    a.include_volume = false;
    for (const auto& item : split_list(include)) {
        if (item == "volume") a.include_volume = true;
        else if (item == "shape") a.include_shape = true;
        else if (item == "injected") a.include_injected = true;
        else if (item == "clinical") a.include_clinical = true;
        else throw ValidationError("features", "unknown include item", item);
    }
    return a;
}

// ---- classified-category CSV (classify output) ----

struct CategoryRow {
    std::string patient_id;
    std::string lesion_id;
    std::vector<ResponseCategory> categories;  // t1..t6
};

void write_categories_csv(const std::string& path, const std::vector<CategoryRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("classify", "cannot write file", path);
    std::vector<std::string> header = {"patient_id", "lesion_id"};
    for (int k = 1; k <= 6; ++k) header.push_back("t" + std::to_string(k));
    write_csv_row(out, header);
    for (const auto& r : rows) {
        std::vector<std::string> fields = {r.patient_id, r.lesion_id};
        for (ResponseCategory c : r.categories) fields.emplace_back(category_name(c));
        write_csv_row(out, fields);
    }
}

std::vector<CategoryRow> read_categories_csv(const std::string& path) {
    const CsvTable table = read_csv_file(path, "classify");
    const int pc = table.require_column("patient_id", "classify");
    const int lc = table.require_column("lesion_id", "classify");
    std::vector<int> tc;
    for (int k = 1; k <= 6; ++k)
        tc.push_back(table.require_column("t" + std::to_string(k), "classify"));
    std::vector<CategoryRow> rows;
    for (const auto& row : table.rows) {
        CategoryRow r;
        r.patient_id = row[pc];
        r.lesion_id = row[lc];
        for (int c : tc) r.categories.push_back(parse_category(row[c]));
        rows.push_back(std::move(r));
    }
    return rows;
}

PipelineOptions pipeline_options(bool impute, bool include_flagged) {
    PipelineOptions p;
    p.impute = impute;
    p.include_flagged = include_flagged;
    return p;
}

json flows_to_json(const std::vector<TransitionFlow>& flows) {
    json arr = json::array();
    const char* names[4] = {"CR", "PR", "SD", "PD"};
    for (const auto& f : flows) {
        json counts = json::object();
        for (int from = 0; from < 4; ++from) {
            json row = json::object();
            for (int to = 0; to < 4; ++to) row[names[to]] = f.counts[from][to];
            counts[names[from]] = std::move(row);
        }
        arr.push_back({{"interval_index", f.interval_index}, {"counts", counts}});
    }
    return arr;
}

}  // namespace

void CommonOpts::apply() const {
    set_max_threads(threads);
    simd::force_isa(simd);
}

// ---- config round-trips ----

template <>
void write_config_echo<SynthOpts>(const std::string& path, const SynthOpts& o) {
    json j = {{"command", "synth"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"n", o.n},
              {"seed", o.seed},
              {"noise_scale", o.noise_scale},
              {"out_dir", o.out_dir}};
    write_json_file(path, j, "synth");
}

template <>
SynthOpts load_config<SynthOpts>(const std::string& path) {
    const json j = read_json_file(path, "synth");
    check_keys(j, {"common", "n", "seed", "noise_scale", "out_dir"}, "synth");
    SynthOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.n = j.value("n", o.n);
    o.seed = j.value("seed", o.seed);
    o.noise_scale = j.value("noise_scale", o.noise_scale);
    o.out_dir = j.value("out_dir", o.out_dir);
    return o;
}

template <>
void write_config_echo<IngestOpts>(const std::string& path, const IngestOpts& o) {
    json j = {{"command", "ingest"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"trajectories", o.trajectories},
              {"out", o.out}};
    write_json_file(path, j, "ingest");
}

template <>
IngestOpts load_config<IngestOpts>(const std::string& path) {
    const json j = read_json_file(path, "ingest");
    check_keys(j, {"common", "trajectories", "out"}, "ingest");
    IngestOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.trajectories = j.value("trajectories", o.trajectories);
    o.out = j.value("out", o.out);
    return o;
}

template <>
void write_config_echo<QcOpts>(const std::string& path, const QcOpts& o) {
    json j = {{"command", "qc"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"trajectories", o.trajectories},
              {"out_dir", o.out_dir},
              {"include_flagged", o.include_flagged},
              {"max_mean_interval_days", o.max_mean_interval_days},
              {"min_observation_days", o.min_observation_days},
              {"max_gap_days", o.max_gap_days},
              {"rebound_fraction", o.rebound_fraction},
              {"rebound_count", o.rebound_count}};
    write_json_file(path, j, "qc");
}

template <>
QcOpts load_config<QcOpts>(const std::string& path) {
    const json j = read_json_file(path, "qc");
    check_keys(j,
               {"common", "trajectories", "out_dir", "include_flagged",
                "max_mean_interval_days", "min_observation_days", "max_gap_days",
                "rebound_fraction", "rebound_count"},
               "qc");
    QcOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.trajectories = j.value("trajectories", o.trajectories);
    o.out_dir = j.value("out_dir", o.out_dir);
    o.include_flagged = j.value("include_flagged", o.include_flagged);
    o.max_mean_interval_days = j.value("max_mean_interval_days", o.max_mean_interval_days);
    o.min_observation_days = j.value("min_observation_days", o.min_observation_days);
    o.max_gap_days = j.value("max_gap_days", o.max_gap_days);
    o.rebound_fraction = j.value("rebound_fraction", o.rebound_fraction);
    o.rebound_count = j.value("rebound_count", o.rebound_count);
    return o;
}

template <>
void write_config_echo<TrackOpts>(const std::string& path, const TrackOpts& o) {
    json j = {{"command", "track"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"manifest", o.manifest},
              {"out_dir", o.out_dir},
              {"max_centroid_mm", o.max_centroid_mm},
              {"shape_features", o.shape_features}};
    write_json_file(path, j, "track");
}

template <>
TrackOpts load_config<TrackOpts>(const std::string& path) {
    const json j = read_json_file(path, "track");
    check_keys(j, {"common", "manifest", "out_dir", "max_centroid_mm", "shape_features"},
               "track");
    TrackOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.manifest = j.value("manifest", o.manifest);
    o.out_dir = j.value("out_dir", o.out_dir);
    o.max_centroid_mm = j.value("max_centroid_mm", o.max_centroid_mm);
    o.shape_features = j.value("shape_features", o.shape_features);
    return o;
}

template <>
void write_config_echo<ResampleOpts>(const std::string& path, const ResampleOpts& o) {
    json j = {{"command", "resample"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"trajectories", o.trajectories},
              {"out_dir", o.out_dir},
              {"method", o.method},
              {"impute", o.impute}};
    write_json_file(path, j, "resample");
}

template <>
ResampleOpts load_config<ResampleOpts>(const std::string& path) {
    const json j = read_json_file(path, "resample");
    check_keys(j, {"common", "trajectories", "out_dir", "method", "impute"}, "resample");
    ResampleOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.trajectories = j.value("trajectories", o.trajectories);
    o.out_dir = j.value("out_dir", o.out_dir);
    o.method = j.value("method", o.method);
    o.impute = j.value("impute", o.impute);
    return o;
}

template <>
void write_config_echo<ClassifyOpts>(const std::string& path, const ClassifyOpts& o) {
    json j = {{"command", "classify"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"trajectories", o.trajectories},
              {"resampled", o.resampled},
              {"out", o.out},
              {"impute", o.impute},
              {"pr_fraction", o.pr_fraction},
              {"pd_fraction", o.pd_fraction},
              {"cr_volume_mm3", o.cr_volume_mm3}};
    write_json_file(path, j, "classify");
}

template <>
ClassifyOpts load_config<ClassifyOpts>(const std::string& path) {
    const json j = read_json_file(path, "classify");
    check_keys(j,
               {"common", "trajectories", "resampled", "out", "impute", "pr_fraction",
                "pd_fraction", "cr_volume_mm3"},
               "classify");
    ClassifyOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.trajectories = j.value("trajectories", o.trajectories);
    o.resampled = j.value("resampled", o.resampled);
    o.out = j.value("out", o.out);
    o.impute = j.value("impute", o.impute);
    o.pr_fraction = j.value("pr_fraction", o.pr_fraction);
    o.pd_fraction = j.value("pd_fraction", o.pd_fraction);
    o.cr_volume_mm3 = j.value("cr_volume_mm3", o.cr_volume_mm3);
    return o;
}

template <>
void write_config_echo<FlowsOpts>(const std::string& path, const FlowsOpts& o) {
    json j = {{"command", "flows"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"classified", o.classified},
              {"out_dir", o.out_dir}};
    write_json_file(path, j, "flows");
}

template <>
FlowsOpts load_config<FlowsOpts>(const std::string& path) {
    const json j = read_json_file(path, "flows");
    check_keys(j, {"common", "classified", "out_dir"}, "flows");
    FlowsOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.classified = j.value("classified", o.classified);
    o.out_dir = j.value("out_dir", o.out_dir);
    return o;
}

template <>
void write_config_echo<ClusterOpts>(const std::string& path, const ClusterOpts& o) {
    json j = {{"command", "cluster"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"trajectories", o.trajectories},
              {"out", o.out},
              {"k", o.k},
              {"n_init", o.n_init},
              {"max_iter", o.max_iter},
              {"tol", o.tol},
              {"seed", o.seed},
              {"impute", o.impute}};
    write_json_file(path, j, "cluster");
}

template <>
ClusterOpts load_config<ClusterOpts>(const std::string& path) {
    const json j = read_json_file(path, "cluster");
    check_keys(j,
               {"common", "trajectories", "out", "k", "n_init", "max_iter", "tol", "seed",
                "impute"},
               "cluster");
    ClusterOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.trajectories = j.value("trajectories", o.trajectories);
    o.out = j.value("out", o.out);
    o.k = j.value("k", o.k);
    o.n_init = j.value("n_init", o.n_init);
    o.max_iter = j.value("max_iter", o.max_iter);
    o.tol = j.value("tol", o.tol);
    o.seed = j.value("seed", o.seed);
    o.impute = j.value("impute", o.impute);
    return o;
}

template <>
void write_config_echo<FeaturesOpts>(const std::string& path, const FeaturesOpts& o) {
    json j = {{"command", "features"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"trajectories", o.trajectories},
              {"clinical", o.clinical},
              {"out_dir", o.out_dir},
              {"horizon", o.horizon},
              {"include", o.include},
              {"impute", o.impute},
              {"standardize", o.standardize}};
    write_json_file(path, j, "features");
}

template <>
FeaturesOpts load_config<FeaturesOpts>(const std::string& path) {
    const json j = read_json_file(path, "features");
    check_keys(j,
               {"common", "trajectories", "clinical", "out_dir", "horizon", "include",
                "impute", "standardize"},
               "features");
    FeaturesOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.trajectories = j.value("trajectories", o.trajectories);
    o.clinical = j.value("clinical", o.clinical);
    o.out_dir = j.value("out_dir", o.out_dir);
    o.horizon = j.value("horizon", o.horizon);
    o.include = j.value("include", o.include);
    o.impute = j.value("impute", o.impute);
    o.standardize = j.value("standardize", o.standardize);
    return o;
}

template <>
void write_config_echo<TrainOpts>(const std::string& path, const TrainOpts& o) {
    json j = {{"command", "train"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"features", o.features},
              {"categories", o.categories},
              {"task", o.task},
              {"method", o.method},
              {"horizon", o.horizon},
              {"seed", o.seed},
              {"out_dir", o.out_dir},
              {"gbdt_rounds", o.gbdt_rounds},
              {"gbdt_depth", o.gbdt_depth},
              {"gbdt_lr", o.gbdt_lr},
              {"gat_hidden", o.gat_hidden},
              {"gat_max_epochs", o.gat_max_epochs},
              {"gat_patience", o.gat_patience},
              {"gat_lr0", o.gat_lr0},
              {"gat_batch", o.gat_batch},
              {"gat_init", o.gat_init}};
    write_json_file(path, j, "train");
}

template <>
TrainOpts load_config<TrainOpts>(const std::string& path) {
    const json j = read_json_file(path, "train");
    check_keys(j,
               {"common", "features", "categories", "task", "method", "horizon", "seed",
                "out_dir", "gbdt_rounds", "gbdt_depth", "gbdt_lr", "gat_hidden",
                "gat_max_epochs", "gat_patience", "gat_lr0", "gat_batch", "gat_init"},
               "train");
    TrainOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.features = j.value("features", o.features);
    o.categories = j.value("categories", o.categories);
    o.task = j.value("task", o.task);
    o.method = j.value("method", o.method);
    o.horizon = j.value("horizon", o.horizon);
    o.seed = j.value("seed", o.seed);
    o.out_dir = j.value("out_dir", o.out_dir);
    o.gbdt_rounds = j.value("gbdt_rounds", o.gbdt_rounds);
    o.gbdt_depth = j.value("gbdt_depth", o.gbdt_depth);
    o.gbdt_lr = j.value("gbdt_lr", o.gbdt_lr);
    o.gat_hidden = j.value("gat_hidden", o.gat_hidden);
    o.gat_max_epochs = j.value("gat_max_epochs", o.gat_max_epochs);
    o.gat_patience = j.value("gat_patience", o.gat_patience);
    o.gat_lr0 = j.value("gat_lr0", o.gat_lr0);
    o.gat_batch = j.value("gat_batch", o.gat_batch);
    o.gat_init = j.value("gat_init", o.gat_init);
    return o;
}

template <>
void write_config_echo<EvaluateOpts>(const std::string& path, const EvaluateOpts& o) {
    json j = {{"command", "evaluate"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"trajectories", o.trajectories},
              {"clinical", o.clinical},
              {"out_dir", o.out_dir},
              {"task", o.task},
              {"methods", o.methods},
              {"horizons", o.horizons},
              {"include", o.include},
              {"folds", o.folds},
              {"grouped", o.grouped},
              {"impute", o.impute},
              {"include_flagged", o.include_flagged},
              {"n_boot", o.n_boot},
              {"n_perm", o.n_perm},
              {"seed", o.seed},
              {"gbdt_rounds", o.gbdt_rounds},
              {"gbdt_depth", o.gbdt_depth},
              {"gbdt_lr", o.gbdt_lr},
              {"gat_hidden", o.gat_hidden},
              {"gat_max_epochs", o.gat_max_epochs},
              {"gat_patience", o.gat_patience},
              {"gat_lr0", o.gat_lr0},
              {"gat_batch", o.gat_batch},
              {"gat_init", o.gat_init}};
    write_json_file(path, j, "evaluate");
}

template <>
EvaluateOpts load_config<EvaluateOpts>(const std::string& path) {
    const json j = read_json_file(path, "evaluate");
    check_keys(j,
               {"common", "trajectories", "clinical", "out_dir", "task", "methods",
                "horizons", "include", "folds", "grouped", "impute", "include_flagged",
                "n_boot", "n_perm", "seed", "gbdt_rounds", "gbdt_depth", "gbdt_lr",
                "gat_hidden", "gat_max_epochs", "gat_patience", "gat_lr0", "gat_batch",
                "gat_init"},
               "evaluate");
    EvaluateOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.trajectories = j.value("trajectories", o.trajectories);
    o.clinical = j.value("clinical", o.clinical);
    o.out_dir = j.value("out_dir", o.out_dir);
    o.task = j.value("task", o.task);
    o.methods = j.value("methods", o.methods);
    o.horizons = j.value("horizons", o.horizons);
    o.include = j.value("include", o.include);
    o.folds = j.value("folds", o.folds);
    o.grouped = j.value("grouped", o.grouped);
    o.impute = j.value("impute", o.impute);
    o.include_flagged = j.value("include_flagged", o.include_flagged);
    o.n_boot = j.value("n_boot", o.n_boot);
    o.n_perm = j.value("n_perm", o.n_perm);
    o.seed = j.value("seed", o.seed);
    o.gbdt_rounds = j.value("gbdt_rounds", o.gbdt_rounds);
    o.gbdt_depth = j.value("gbdt_depth", o.gbdt_depth);
    o.gbdt_lr = j.value("gbdt_lr", o.gbdt_lr);
    o.gat_hidden = j.value("gat_hidden", o.gat_hidden);
    o.gat_max_epochs = j.value("gat_max_epochs", o.gat_max_epochs);
    o.gat_patience = j.value("gat_patience", o.gat_patience);
    o.gat_lr0 = j.value("gat_lr0", o.gat_lr0);
    o.gat_batch = j.value("gat_batch", o.gat_batch);
    o.gat_init = j.value("gat_init", o.gat_init);
    return o;
}

template <>
void write_config_echo<ReportOpts>(const std::string& path, const ReportOpts& o) {
    json j = {{"command", "report"},
              {"version", kVersion},
              {"common", common_to_json(o.common)},
              {"cluster_report", o.cluster_report},
              {"flows_report", o.flows_report},
              {"eval_report", o.eval_report},
              {"out_dir", o.out_dir}};
    write_json_file(path, j, "report");
}

template <>
ReportOpts load_config<ReportOpts>(const std::string& path) {
    const json j = read_json_file(path, "report");
    check_keys(j, {"common", "cluster_report", "flows_report", "eval_report", "out_dir"},
               "report");
    ReportOpts o;
    if (j.contains("common")) common_from_json(j["common"], o.common);
    o.cluster_report = j.value("cluster_report", o.cluster_report);
    o.flows_report = j.value("flows_report", o.flows_report);
    o.eval_report = j.value("eval_report", o.eval_report);
    o.out_dir = j.value("out_dir", o.out_dir);
    return o;
}

// ---- subcommands ----

int cmd_synth(const SynthOpts& opts) {
    opts.common.apply();
    if (opts.out_dir.empty()) throw ValidationError("synth", "--out-dir is required");
    ensure_dir(opts.out_dir);
    SynthConfig cfg;
    cfg.n_lesions = opts.n;
    cfg.seed = opts.seed;
    cfg.noise_scale = opts.noise_scale;
    const GeneratedCohort cohort = generate(cfg);
    write_trajectory_csv(opts.out_dir + "/trajectories.csv", cohort.trajectories);
    write_labels_csv(opts.out_dir + "/labels.csv", cohort);
    write_clinical_csv(opts.out_dir + "/clinical.csv", cohort.clinical);
    write_config_echo(opts.out_dir + "/synth.config.json", opts);
    std::cout << "synth: wrote " << cohort.trajectories.size() << " lesion trajectories\n";
    return 0;
}

int cmd_ingest(const IngestOpts& opts) {
    opts.common.apply();
    const auto trajs = read_trajectory_csv(opts.trajectories);
    std::size_t records = 0;
    for (const auto& t : trajs) records += t.records.size();
    if (!opts.out.empty()) {
        write_trajectory_csv(opts.out, trajs);
        write_config_echo(opts.out + ".config.json", opts);
    }
    std::cout << "ingest: " << trajs.size() << " trajectories, " << records << " records\n";
    return 0;
}

int cmd_qc(const QcOpts& opts) {
    opts.common.apply();
    if (opts.out_dir.empty()) throw ValidationError("qc", "--out-dir is required");
    ensure_dir(opts.out_dir);
    const auto trajs = read_trajectory_csv(opts.trajectories);
    CohortCriteria criteria{opts.max_mean_interval_days, opts.min_observation_days,
                            opts.max_gap_days};
    CohortSplit split = apply_cohort_criteria(trajs, criteria);
    std::vector<LesionTrajectory> kept;
    for (auto& traj : split.kept) {
        auto swing = detect_cr_swings(traj, opts.rebound_fraction, opts.rebound_count);
        if (swing.has_value()) split.flagged.push_back(std::move(*swing));
        else kept.push_back(std::move(traj));
    }
    write_flag_report(opts.out_dir + "/flags.csv", split.flagged);
    write_trajectory_csv(opts.out_dir + "/kept.csv", opts.include_flagged ? trajs : kept);
    write_config_echo(opts.out_dir + "/qc.config.json", opts);
    std::cout << "qc: kept " << (opts.include_flagged ? trajs.size() : kept.size())
              << ", flagged " << split.flagged.size() << "\n";
    return 0;
}

int cmd_track(const TrackOpts& opts) {
    opts.common.apply();
    if (opts.out_dir.empty()) throw ValidationError("track", "--out-dir is required");
    ensure_dir(opts.out_dir);
    auto entries = read_series_manifest(opts.manifest);
    std::stable_sort(entries.begin(), entries.end(),
                     [](const SeriesEntry& a, const SeriesEntry& b) {
                         if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
                         return a.day < b.day;
                     });
    TrackOptions topt;
    topt.max_centroid_mm = opts.max_centroid_mm;
    topt.attach_shape_features = opts.shape_features;

    std::vector<LesionTrajectory> trajectories;
    std::vector<NewLesionRecord> new_lesions;
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i;
        std::vector<std::pair<long long, LabelVolume>> series;
        while (j < entries.size() && entries[j].patient_id == entries[i].patient_id) {
            series.emplace_back(entries[j].day,
                                read_label_volume(entries[j].sidecar_path,
                                                  entries[j].volume_path));
            ++j;
        }
        TrackResult result = build_trajectories(entries[i].patient_id, series, topt);
        for (auto& t : result.trajectories) trajectories.push_back(std::move(t));
        for (auto& r : result.new_lesions) new_lesions.push_back(std::move(r));
        for (const auto& note : result.notes) std::cerr << "track: note: " << note << "\n";
        i = j;
    }
    write_trajectory_csv(opts.out_dir + "/trajectories.csv", trajectories);
    write_new_lesion_report(opts.out_dir + "/new_lesions.csv", new_lesions);
    write_config_echo(opts.out_dir + "/track.config.json", opts);
    std::cout << "track: " << trajectories.size() << " trajectories, " << new_lesions.size()
              << " new lesions\n";
    return 0;
}

int cmd_resample(const ResampleOpts& opts) {
    opts.common.apply();
    if (opts.out_dir.empty()) throw ValidationError("resample", "--out-dir is required");
    ensure_dir(opts.out_dir);
    const auto trajs = read_trajectory_csv(opts.trajectories);
    const ResampleMethod method = parse_resample_method(opts.method);
    std::vector<ResampledTrajectory> resampled;
    for (const auto& t : trajs) {
        ResampledTrajectory r;
        if (method == ResampleMethod::bspline) {
            bool fell_back = false;
            r = resample_bspline(t, &fell_back);
            if (fell_back)
                std::cerr << "resample: warning: " << t.patient_id << "/" << t.lesion_id
                          << " has fewer than 4 records; used linear interpolation\n";
        } else {
            r = resample(t, method);
        }
        if (opts.impute) r = impute_noisy_points(r);
        resampled.push_back(std::move(r));
    }
    write_resampled_csv(opts.out_dir + "/resampled.csv", resampled, false);
    write_resampled_csv(opts.out_dir + "/normalized.csv", resampled, true);
    write_config_echo(opts.out_dir + "/resample.config.json", opts);
    std::cout << "resample: " << resampled.size() << " trajectories on the 7-point grid\n";
    return 0;
}

int cmd_classify(const ClassifyOpts& opts) {
    opts.common.apply();
    if (opts.out.empty()) throw ValidationError("classify", "--out is required");
    if (opts.trajectories.empty() == opts.resampled.empty())
        throw ValidationError("classify",
                              "exactly one of --trajectories / --resampled is required");
    std::vector<ResampledTrajectory> resampled;
    if (!opts.trajectories.empty()) {
        for (const auto& t : read_trajectory_csv(opts.trajectories))
            resampled.push_back(resample_nn(t));
    } else {
        resampled = read_resampled_csv(opts.resampled);
    }
    if (opts.impute)
        for (auto& r : resampled) r = impute_noisy_points(r);

    ResponseCriteria criteria{opts.pr_fraction, opts.pd_fraction, opts.cr_volume_mm3};
    std::vector<CategoryRow> rows;
    for (const auto& r : resampled) {
        CategoryRow row;
        row.patient_id = r.patient_id;
        row.lesion_id = r.lesion_id;
        for (const auto& point : classify_trajectory(r, criteria))
            row.categories.push_back(point.category);
        rows.push_back(std::move(row));
    }
    write_categories_csv(opts.out, rows);
    write_config_echo(opts.out + ".config.json", opts);
    std::cout << "classify: " << rows.size() << " lesions classified at t1..t6\n";
    return 0;
}

int cmd_flows(const FlowsOpts& opts) {
    opts.common.apply();
    if (opts.out_dir.empty()) throw ValidationError("flows", "--out-dir is required");
    ensure_dir(opts.out_dir);
    const auto rows = read_categories_csv(opts.classified);
    std::vector<std::vector<ResponseCategory>> sequences;
    sequences.reserve(rows.size());
    for (const auto& r : rows) sequences.push_back(r.categories);
    const auto flows = compute_flows(sequences);

    write_json_file(opts.out_dir + "/flows.json",
                    json{{"n_lesions", rows.size()}, {"flows", flows_to_json(flows)}}, "flows");
    std::ofstream csv(opts.out_dir + "/flows.csv");
    if (!csv) throw IoError("flows", "cannot write file", opts.out_dir + "/flows.csv");
    write_csv_row(csv, {"interval", "from", "to", "count"});
    const char* names[4] = {"CR", "PR", "SD", "PD"};
    for (const auto& f : flows)
        for (int from = 0; from < 4; ++from)
            for (int to = 0; to < 4; ++to)
                write_csv_row(csv, {std::to_string(f.interval_index), names[from], names[to],
                                    std::to_string(f.counts[from][to])});
    write_config_echo(opts.out_dir + "/flows.config.json", opts);
    std::cout << "flows: " << flows.size() << " transition matrices\n";
    return 0;
}

int cmd_cluster(const ClusterOpts& opts) {
    opts.common.apply();
    if (opts.out.empty()) throw ValidationError("cluster", "--out is required");
    const auto trajs = read_trajectory_csv(opts.trajectories);
    const PreparedCohort cohort = prepare_cohort(trajs, pipeline_options(opts.impute, false));
    if (cohort.resampled.empty()) throw ValidationError("cluster", "no trajectories kept");

    std::vector<std::vector<double>> data;
    std::vector<std::string> ids;
    for (const auto& r : cohort.resampled) {
        data.emplace_back(r.normalized.begin() + 1, r.normalized.end());
        ids.push_back(r.patient_id + "/" + r.lesion_id);
    }
    GmmFitOptions fit_opts;
    fit_opts.k = opts.k;
    fit_opts.n_init = opts.n_init;
    fit_opts.max_iter = opts.max_iter;
    fit_opts.tol = opts.tol;
    fit_opts.seed = opts.seed;
    const GmmModel model = fit_gmm(data, fit_opts);
    const auto assignments = assign(model, data, ids);
    const auto profiles = cluster_profiles(model, data, assignments, cohort.t6_categories);
    write_cluster_report(opts.out, model, assignments, profiles);
    write_config_echo(opts.out + ".config.json", opts);
    std::cout << "cluster: fitted k=" << model.k
              << ", log-likelihood=" << format_double(model.log_likelihood) << "\n";
    return 0;
}

int cmd_features(const FeaturesOpts& opts) {
    opts.common.apply();
    if (opts.out_dir.empty()) throw ValidationError("features", "--out-dir is required");
    ensure_dir(opts.out_dir);
    const auto trajs = read_trajectory_csv(opts.trajectories);
    const PreparedCohort cohort = prepare_cohort(trajs, pipeline_options(opts.impute, false));

    ClinicalTable clinical;
    const AssembleOptions aopts = parse_include(opts.include, opts.horizon);
    if (aopts.include_clinical) {
        if (opts.clinical.empty())
            throw ValidationError("features", "--clinical required for include=clinical");
        clinical = read_clinical_csv(opts.clinical);
    }
    const FeatureMatrix matrix = assemble(cohort.resampled, &clinical, aopts);
    write_feature_csv(opts.out_dir + "/features.csv", matrix);
    if (opts.standardize) {
        std::vector<std::size_t> all_rows(matrix.n_rows());
        for (std::size_t r = 0; r < all_rows.size(); ++r) all_rows[r] = r;
        const StandardizationParams params = standardize_fit(matrix, all_rows);
        write_standardization_json(opts.out_dir + "/standardization.json", params, matrix);
        write_feature_csv(opts.out_dir + "/features_standardized.csv",
                          standardize_apply(params, matrix));
    }
    write_config_echo(opts.out_dir + "/features.config.json", opts);
    std::cout << "features: " << matrix.n_rows() << " rows x " << matrix.n_cols()
              << " columns\n";
    return 0;
}

namespace {

std::vector<int> labels_for_rows(const FeatureMatrix& matrix,
                                 const std::vector<CategoryRow>& categories, TaskKind task,
                                 const char* stage) {
    std::map<std::pair<std::string, std::string>, ResponseCategory> t6;
    for (const auto& r : categories) t6[{r.patient_id, r.lesion_id}] = r.categories.back();
    std::vector<ResponseCategory> cats;
    for (const auto& key : matrix.rows) {
        auto it = t6.find(key);
        if (it == t6.end())
            throw ValidationError(stage, "missing t6 category for lesion",
                                  key.first + "/" + key.second);
        cats.push_back(it->second);
    }
    return make_targets(cats, task);
}

}  // namespace

int cmd_train(const TrainOpts& opts) {
    opts.common.apply();
    if (opts.out_dir.empty()) throw ValidationError("train", "--out-dir is required");
    ensure_dir(opts.out_dir);
    const FeatureMatrix raw = read_feature_csv(opts.features);
    const auto categories = read_categories_csv(opts.categories);
    const std::vector<int> labels =
        labels_for_rows(raw, categories, parse_task(opts.task), "train");

    std::vector<std::size_t> all_rows(raw.n_rows());
    for (std::size_t r = 0; r < all_rows.size(); ++r) all_rows[r] = r;
    const StandardizationParams params = standardize_fit(raw, all_rows);
    const FeatureMatrix matrix = standardize_apply(params, raw);
    write_standardization_json(opts.out_dir + "/standardization.json", params, matrix);

    const Method method = parse_method(opts.method);
    if (method == Method::gbdt) {
        GbdtConfig cfg;
        cfg.n_rounds = opts.gbdt_rounds;
        cfg.max_depth = opts.gbdt_depth;
        cfg.learning_rate = opts.gbdt_lr;
        cfg.seed = opts.seed;
        const GbdtModel model = gbdt_fit(matrix, labels, cfg);
        write_gbdt_json(opts.out_dir + "/model.json", model);
    } else {
        TrainConfig cfg;
        cfg.mode = method == Method::gat_general ? GatMode::general : GatMode::time_specific;
        cfg.horizon = opts.horizon;
        cfg.hidden = opts.gat_hidden;
        cfg.max_epochs = opts.gat_max_epochs;
        cfg.patience = opts.gat_patience;
        cfg.lr0 = opts.gat_lr0;
        cfg.batch_size = opts.gat_batch;
        cfg.init_scale = opts.gat_init;
        cfg.seed = opts.seed;
        const TrainedGat model = gat_train(graphs_from_features(matrix, labels), cfg);
        write_gat_json(opts.out_dir + "/model.json", model);
        write_train_log_csv(opts.out_dir + "/train_log.csv", model.log);
    }
    write_config_echo(opts.out_dir + "/train.config.json", opts);
    std::cout << "train: model written to " << opts.out_dir << "/model.json\n";
    return 0;
}

int cmd_evaluate(const EvaluateOpts& opts) {
    opts.common.apply();
    if (opts.out_dir.empty()) throw ValidationError("evaluate", "--out-dir is required");
    ensure_dir(opts.out_dir);
    const auto trajs = read_trajectory_csv(opts.trajectories);
    const PreparedCohort cohort =
        prepare_cohort(trajs, pipeline_options(opts.impute, opts.include_flagged));
    if (cohort.resampled.empty()) throw ValidationError("evaluate", "no trajectories kept");

    const AssembleOptions aopts = parse_include(opts.include, 5);
    ClinicalTable clinical;
    if (aopts.include_clinical) {
        if (opts.clinical.empty())
            throw ValidationError("evaluate", "--clinical required for include=clinical");
        clinical = read_clinical_csv(opts.clinical);
    }
    const FeatureMatrix matrix = assemble(cohort.resampled, &clinical, aopts);

    ProtocolOptions popts;
    popts.task = parse_task(opts.task);
    popts.methods.clear();
    for (const auto& m : split_list(opts.methods)) popts.methods.push_back(parse_method(m));
    popts.horizons.clear();
    for (const auto& h : split_list(opts.horizons)) popts.horizons.push_back(std::stoi(h));
    popts.n_folds = opts.folds;
    popts.grouped = opts.grouped;
    popts.n_boot = opts.n_boot;
    popts.n_perm = opts.n_perm;
    popts.seed = opts.seed;
    popts.gbdt.n_rounds = opts.gbdt_rounds;
    popts.gbdt.max_depth = opts.gbdt_depth;
    popts.gbdt.learning_rate = opts.gbdt_lr;
    popts.gat.hidden = opts.gat_hidden;
    popts.gat.max_epochs = opts.gat_max_epochs;
    popts.gat.patience = opts.gat_patience;
    popts.gat.lr0 = opts.gat_lr0;
    popts.gat.batch_size = opts.gat_batch;
    popts.gat.init_scale = opts.gat_init;

    const std::vector<int> labels = make_targets(cohort.t6_categories, popts.task);
    const EvalReport report = run_protocol(matrix, labels, popts);
    write_eval_report_json(opts.out_dir + "/eval_report.json", report);
    write_eval_report_csv(opts.out_dir + "/eval_report.csv", report);
    if (!report.pvalues.empty()) write_pvalues_csv(opts.out_dir + "/pvalues.csv", report);
    write_pooled_scores_csv(opts.out_dir + "/pooled_scores.csv", report);
    write_config_echo(opts.out_dir + "/evaluate.config.json", opts);
    for (const auto& m : report.methods) {
        std::cout << "evaluate: " << method_name(m.method) << ":";
        for (const auto& c : m.cells)
            std::cout << " t0:t" << c.horizon << "=" << format_double(c.auc);
        std::cout << "\n";
    }
    return 0;
}

int cmd_report(const ReportOpts& opts) {
    opts.common.apply();
    if (opts.out_dir.empty()) throw ValidationError("report", "--out-dir is required");
    ensure_dir(opts.out_dir);
    json bundle;
    bundle["version"] = kVersion;
    if (!opts.cluster_report.empty())
        bundle["cluster"] = read_json_file(opts.cluster_report, "report");
    if (!opts.flows_report.empty())
        bundle["flows"] = read_json_file(opts.flows_report, "report");
    if (!opts.eval_report.empty())
        bundle["evaluation"] = read_json_file(opts.eval_report, "report");
    write_json_file(opts.out_dir + "/bundle.json", bundle, "report");

    // Flat CSV projections for plotting.
    if (bundle.contains("evaluation")) {
        std::ofstream csv(opts.out_dir + "/auc_table.csv");
        if (!csv) throw IoError("report", "cannot write file", opts.out_dir + "/auc_table.csv");
        write_csv_row(csv, {"task", "method", "horizon", "auc", "ci_lo", "ci_hi"});
        const auto& ev = bundle["evaluation"];
        for (const auto& [method, cells] : ev.at("methods").items()) {
            for (const auto& cell : cells) {
                write_csv_row(csv, {ev.at("task").get<std::string>(), method,
                                    std::to_string(cell.at("horizon").get<int>()),
                                    format_double(cell.at("auc").get<double>()),
                                    format_double(cell.at("ci95")[0].get<double>()),
                                    format_double(cell.at("ci95")[1].get<double>())});
            }
        }
    }
    if (bundle.contains("cluster")) {
        std::ofstream csv(opts.out_dir + "/profiles.csv");
        if (!csv) throw IoError("report", "cannot write file", opts.out_dir + "/profiles.csv");
        write_csv_row(csv, {"cluster", "t0", "t1", "t2", "t3", "t4", "t5", "t6", "CR", "PR",
                            "SD", "PD"});
        for (const auto& prof : bundle["cluster"].at("profiles")) {
            if (prof.at("empty").get<bool>()) continue;
            std::vector<std::string> row = {std::to_string(prof.at("cluster").get<int>())};
            for (const auto& v : prof.at("mean_trajectory"))
                row.push_back(format_double(v.get<double>()));
            for (const char* cat : {"CR", "PR", "SD", "PD"})
                row.push_back(
                    std::to_string(prof.at("t6_histogram").at(cat).get<long long>()));
            write_csv_row(csv, row);
        }
    }
    if (bundle.contains("flows")) {
        std::ofstream csv(opts.out_dir + "/flows.csv");
        if (!csv) throw IoError("report", "cannot write file", opts.out_dir + "/flows.csv");
        write_csv_row(csv, {"interval", "from", "to", "count"});
        for (const auto& f : bundle["flows"].at("flows")) {
            const int interval = f.at("interval_index").get<int>();
            for (const auto& [from, row] : f.at("counts").items())
                for (const auto& [to, count] : row.items())
                    write_csv_row(csv, {std::to_string(interval), from, to,
                                        std::to_string(count.get<long long>())});
        }
    }
    write_config_echo(opts.out_dir + "/report.config.json", opts);
    std::cout << "report: bundle written to " << opts.out_dir << "/bundle.json\n";
    return 0;
}

}  // namespace bmt::cli
