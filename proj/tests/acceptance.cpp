// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Tolerances are pinned in code next to each check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bmt/cli.hpp"
#include "bmt/cluster.hpp"
#include "bmt/evalstat.hpp"
#include "bmt/pipeline.hpp"
#include "bmt/response.hpp"
#include "bmt/rng.hpp"
#include "bmt/synthgen.hpp"
#include "bmt/tgat.hpp"
#include "bmt/track.hpp"
#include "oracles.hpp"

using namespace bmt;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Criterion {
    int index;
    const char* name;
    std::chrono::steady_clock::time_point start;
    bool ok = true;
    std::string detail;

    Criterion(int index_, const char* name_)
        : index(index_), name(name_), start(std::chrono::steady_clock::now()) {}

    void expect(bool condition, const std::string& message) {
        if (!condition) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += message;
        }
    }

    ~Criterion() {
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %2d: %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", index, name,
                    seconds, detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++g_failures;
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Shared cohort preparation: QC, NN resampling, imputation, labels.
struct PreparedSynth {
    GeneratedCohort cohort;
    PreparedCohort prepared;
    FeatureMatrix features;          // volume + injected, horizon 5
    std::vector<int> resp_labels;
    std::vector<int> archetypes;     // aligned with prepared.resampled
};

PreparedSynth prepare_synth(std::size_t n, uint64_t seed) {
    PreparedSynth out;
    SynthConfig cfg;
    cfg.n_lesions = n;
    cfg.seed = seed;
    out.cohort = generate(cfg);
    out.prepared = prepare_cohort(out.cohort.trajectories, {});
    AssembleOptions aopts;
    aopts.include_injected = true;
    out.features = assemble(out.prepared.resampled, nullptr, aopts);
    out.resp_labels = make_targets(out.prepared.t6_categories, TaskKind::resp_vs_nonresp);
    std::map<std::string, int> truth;
    for (std::size_t i = 0; i < out.cohort.trajectories.size(); ++i)
        truth[out.cohort.trajectories[i].lesion_id] = out.cohort.archetype_labels[i];
    for (const auto& r : out.prepared.resampled) out.archetypes.push_back(truth.at(r.lesion_id));
    return out;
}

void criterion_1_rano_oracle() {
    Criterion c{1, "RANO rule matches the enumeration oracle on 1000 random trajectories"};
    Rng rng(1001);
    for (int trial = 0; trial < 1000 && c.ok; ++trial) {
        const std::size_t len = 2 + rng.uniform_int(6);
        std::vector<double> volumes = {rng.uniform(5.0, 800.0)};
        std::vector<long long> days = {0};
        for (std::size_t k = 1; k < len; ++k) {
            volumes.push_back(rng.uniform(0.0, 3.0 * volumes[0]));
            days.push_back(days.back() + 60);
        }
        const auto got = classify_series(days, volumes);
        const auto expected = oracle::rano_series(volumes);
        for (std::size_t k = 0; k < expected.size(); ++k)
            c.expect(got[k].category == expected[k],
                     "mismatch at trial " + std::to_string(trial));
    }
}

void criterion_2_auc_oracle() {
    Criterion c{2, "AUC matches brute-force pair counting on 200 tied score sets"};
    Rng rng(1002);
    int done = 0;
    while (done < 200) {
        const std::size_t n = 8 + rng.uniform_int(80);
        std::vector<int> labels;
        std::vector<double> scores;
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            labels.push_back(rng.uniform01() < 0.5 ? 1 : 0);
            scores.push_back(static_cast<double>(rng.uniform_int(10)) / 10.0);  // forced ties
            (labels.back() == 1 ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) continue;
        ++done;
        const double fast = auc(labels, scores);
        c.expect(std::fabs(fast - oracle::auc_pair_count(labels, scores)) <= 1e-12,
                 "pair-count deviation at set " + std::to_string(done));
        c.expect(std::fabs(fast - oracle::auc_trapezoid(labels, scores)) <= 1e-12,
                 "trapezoid deviation at set " + std::to_string(done));
    }
}

void criteria_3_4_em(const PreparedSynth& synth500) {
    std::vector<std::vector<double>> data;
    for (const auto& r : synth500.prepared.resampled)
        data.emplace_back(r.normalized.begin() + 1, r.normalized.end());

    GmmFitOptions fopts;
    fopts.seed = 42;
    GmmFitReport report;
    const auto model = fit_gmm(data, fopts, &report);

    {
        Criterion c{3, "EM log-likelihood non-decreasing in every restart"};
        for (const auto& trace : report.restart_traces) {
            for (std::size_t t = 1; t < trace.size(); ++t) {
                c.expect(trace[t] - trace[t - 1] >=
                             -1e-9 * std::max(1.0, std::fabs(trace[t - 1])),
                         "decrease at iteration " + std::to_string(t));
            }
        }
        c.detail = std::to_string(report.restart_traces.size()) + " restarts checked";
    }
    {
        Criterion c{4, "cluster recovery ARI >= 0.8 on the seed-42 cohort"};
        std::vector<int> pred;
        for (const auto& a : assign(model, data)) pred.push_back(a.cluster);
        const double ari = adjusted_rand_index(pred, synth500.archetypes);
        c.expect(ari >= 0.8, "ARI " + fmt(ari));
        c.detail = "ARI " + fmt(ari);
    }
}

double gat_loss(const GatParams& p, const TemporalGraph& g, int label, double weight) {
    const double prob = gat_forward(p, g).probability;
    const double y = static_cast<double>(label);
    return -weight * (y * std::log(prob) + (1.0 - y) * std::log(1.0 - prob));
}

void criteria_5_6_gat() {
    Rng rng(1005);
    double worst_grad = 0.0;
    double worst_row_dev = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(5));
        const int d = 1 + static_cast<int>(rng.uniform_int(8));
        std::vector<std::vector<double>> points(n);
        for (auto& p : points) {
            p.resize(d);
            for (double& v : p) v = rng.uniform(-1.5, 1.5);
        }
        const auto g = build_graph(points, {}, trial % 2);
        GatParams params;
        params.input_dim = d;
        params.hidden = 6;
        params.w.resize(6 * d);
        params.attn.resize(13);
        params.head_w.resize(6);
        for (double& v : params.w) v = rng.uniform(-0.8, 0.8);
        for (double& v : params.attn) v = rng.uniform(-0.8, 0.8);
        for (double& v : params.head_w) v = rng.uniform(-0.8, 0.8);
        params.head_b = rng.uniform(-0.5, 0.5);
        const double weight = rng.uniform(0.5, 2.0);

        const auto analytic = gat_backward(params, g, g.label, weight);
        const auto flat = params.flat();
        for (std::size_t k = 0; k < flat.size(); ++k) {
            auto plus = flat, minus = flat;
            plus[k] += 1e-4;
            minus[k] -= 1e-4;
            const double numeric =
                (gat_loss(GatParams::from_flat(plus, d, 6, params.leaky_slope), g, g.label,
                          weight) -
                 gat_loss(GatParams::from_flat(minus, d, 6, params.leaky_slope), g, g.label,
                          weight)) /
                2e-4;
            const double denom =
                std::max(1e-6, std::max(std::fabs(analytic[k]), std::fabs(numeric)));
            worst_grad = std::max(worst_grad, std::fabs(analytic[k] - numeric) / denom);
        }

        const auto fwd = gat_forward(params, g);
        for (const auto& row : fwd.attention) {
            double sum = 0.0;
            for (double a : row) sum += a;
            worst_row_dev = std::max(worst_row_dev, std::fabs(sum - 1.0));
        }
    }
    {
        Criterion c{5, "attention-network gradients match finite differences"};
        c.expect(worst_grad < 1e-4, "max relative error " + fmt(worst_grad));
        c.detail = "max relative error " + fmt(worst_grad);
    }
    {
        Criterion c{6, "attention rows sum to one"};
        c.expect(worst_row_dev < 1e-9, "max deviation " + std::to_string(worst_row_dev));
        c.detail = "max |row sum - 1| = " + std::to_string(worst_row_dev);
    }
}

void criterion_7_trend(const PreparedSynth& synth800, EvalReport* report_out) {
    Criterion c{7, "pooled AUC rises with horizon for gbdt and gat-general"};
    ProtocolOptions popts;
    popts.task = TaskKind::resp_vs_nonresp;
    popts.methods = {Method::gbdt, Method::gat_general};
    popts.seed = 7;
    const auto report = run_protocol(synth800.features, synth800.resp_labels, popts);
    for (const auto& m : report.methods) {
        const auto& cells = m.cells;
        std::string curve;
        for (const auto& cell : cells) curve += " " + fmt(cell.auc);
        for (std::size_t h = 1; h < cells.size(); ++h) {
            c.expect(cells[h].auc >= cells[h - 1].auc - 0.02,
                     std::string(method_name(m.method)) + " dips at horizon " +
                         std::to_string(cells[h].horizon) + " (" + fmt(cells[h - 1].auc) +
                         " -> " + fmt(cells[h].auc) + ")");
        }
        const double gain = cells[1].auc - cells[0].auc;
        c.expect(gain >= 0.05, std::string(method_name(m.method)) +
                                   " first-follow-up gain " + fmt(gain) + " < 0.05");
        c.detail += std::string(method_name(m.method)) + ":" + curve + "  ";
    }
    if (report_out != nullptr) *report_out = report;
}

void criterion_8_general_contract(const PreparedSynth& synth800) {
    Criterion c{8, "one general model serves all horizons within 0.1 of time-specific"};
    const auto& labels = synth800.resp_labels;

    // Stratified 70/30 split.
    Rng rng(derive_seed(7, "acceptance-split"));
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
    auto shuffle = [&](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(i)]);
    };
    shuffle(pos);
    shuffle(neg);
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < pos.size(); ++i)
        (i < pos.size() * 7 / 10 ? train : test).push_back(pos[i]);
    for (std::size_t i = 0; i < neg.size(); ++i)
        (i < neg.size() * 7 / 10 ? train : test).push_back(neg[i]);
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());

    const auto params = standardize_fit(synth800.features, train);
    const auto standardized = standardize_apply(params, synth800.features);
    auto select = [&](const std::vector<std::size_t>& rows) {
        FeatureMatrix m;
        for (std::size_t r : rows) m.rows.push_back(standardized.rows[r]);
        for (const auto& col : standardized.columns) {
            FeatureColumn out = col;
            out.values.clear();
            for (std::size_t r : rows) out.values.push_back(col.values[r]);
            m.columns.push_back(std::move(out));
        }
        return m;
    };
    std::vector<int> train_labels, test_labels;
    for (std::size_t r : train) train_labels.push_back(labels[r]);
    for (std::size_t r : test) test_labels.push_back(labels[r]);
    const auto train_graphs = graphs_from_features(select(train), train_labels);
    const auto test_graphs = graphs_from_features(select(test), test_labels);

    TrainConfig gcfg;
    gcfg.mode = GatMode::general;
    gcfg.seed = derive_seed(7, "acceptance-general");
    const auto general = gat_train(train_graphs, gcfg);

    for (int horizon = 0; horizon <= 5; ++horizon) {
        const auto general_scores = gat_predict(general, test_graphs, horizon);
        c.expect(general_scores.size() == test_graphs.size(), "missing predictions");
        TrainConfig tcfg;
        tcfg.mode = GatMode::time_specific;
        tcfg.horizon = horizon;
        tcfg.seed = derive_seed(7, "acceptance-specific", horizon);
        const auto specific = gat_train(train_graphs, tcfg);
        const double auc_general = auc(test_labels, general_scores);
        const double auc_specific = auc(test_labels, gat_predict(specific, test_graphs, horizon));
        c.expect(std::fabs(auc_general - auc_specific) <= 0.1,
                 "horizon " + std::to_string(horizon) + ": general " + fmt(auc_general) +
                     " vs specific " + fmt(auc_specific));
        c.detail += "t" + std::to_string(horizon) + ":" + fmt(auc_general) + "/" +
                    fmt(auc_specific) + " ";
    }
}

void criterion_9_statistics() {
    Criterion c{9, "permutation and bootstrap sanity"};
    Rng rng(1009);
    std::vector<int> labels;
    std::vector<double> same, perfect, noise;
    for (int i = 0; i < 100; ++i) {
        labels.push_back(i % 2);
        same.push_back(rng.uniform01());
        perfect.push_back(static_cast<double>(labels.back()));
        noise.push_back(rng.uniform01());
    }
    const double p_same = permutation_test(labels, same, same, 1000, 9);
    c.expect(p_same == 1.0, "identical scores gave p = " + fmt(p_same));
    const double p_diff = permutation_test(labels, perfect, noise, 1000, 9);
    c.expect(p_diff <= 0.01, "perfect-vs-random gave p = " + fmt(p_diff));

    for (uint64_t seed = 0; seed < 20; ++seed) {
        std::vector<int> l;
        std::vector<double> s;
        Rng local(300 + seed);
        for (int i = 0; i < 120; ++i) {
            l.push_back(local.uniform01() < 0.5 ? 1 : 0);
            s.push_back(local.uniform01() + 0.3 * l.back());
        }
        const double point = auc(l, s);
        const auto ci = bootstrap_ci(l, s, 300, seed);
        c.expect(ci.first <= point && point <= ci.second,
                 "CI missed the point estimate at seed " + std::to_string(seed));
    }
}

void criterion_10_determinism() {
    Criterion c{10, "synth -> features -> evaluate -> report is byte-identical"};
    const fs::path base = fs::temp_directory_path() / "bmt_acceptance_det";
    fs::remove_all(base);

    auto run_chain = [&](const std::string& tag) {
        const std::string dir = (base / tag).string();
        cli::SynthOpts synth;
        synth.n = 150;
        synth.seed = 42;
        synth.out_dir = dir + "/synth";
        cli::cmd_synth(synth);

        cli::FeaturesOpts features;
        features.trajectories = dir + "/synth/trajectories.csv";
        features.include = "volume,injected";
        features.out_dir = dir + "/features";
        cli::cmd_features(features);

        cli::ClassifyOpts classify;
        classify.trajectories = dir + "/synth/trajectories.csv";
        classify.out = dir + "/categories.csv";
        cli::cmd_classify(classify);

        cli::FlowsOpts flows;
        flows.classified = dir + "/categories.csv";
        flows.out_dir = dir + "/flows";
        cli::cmd_flows(flows);

        cli::ClusterOpts cluster;
        cluster.trajectories = dir + "/synth/trajectories.csv";
        cluster.out = dir + "/cluster.json";
        cluster.seed = 42;
        cli::cmd_cluster(cluster);

        cli::EvaluateOpts evaluate;
        evaluate.trajectories = dir + "/synth/trajectories.csv";
        evaluate.include = "volume,injected";
        evaluate.methods = "gbdt";
        evaluate.seed = 42;
        evaluate.n_boot = 300;
        evaluate.n_perm = 100;
        evaluate.out_dir = dir + "/eval";
        cli::cmd_evaluate(evaluate);

        cli::ReportOpts report;
        report.cluster_report = dir + "/cluster.json";
        report.flows_report = dir + "/flows/flows.json";
        report.eval_report = dir + "/eval/eval_report.json";
        report.out_dir = dir + "/bundle";
        cli::cmd_report(report);
        return dir;
    };

    const std::string a = run_chain("a");
    const std::string b = run_chain("b");
    for (const char* artifact :
         {"/bundle/bundle.json", "/bundle/auc_table.csv", "/bundle/profiles.csv",
          "/bundle/flows.csv", "/eval/eval_report.json", "/eval/pooled_scores.csv",
          "/features/features.csv"}) {
        c.expect(slurp(a + artifact) == slurp(b + artifact),
                 std::string(artifact) + " differs between runs");
    }
    fs::remove_all(base);
}

void criterion_11_mask_path() {
    Criterion c{11, "sphere-mask series tracks to the expected categories"};
    const fs::path base = fs::temp_directory_path() / "bmt_acceptance_masks";
    fs::remove_all(base);
    fs::create_directories(base);

    GridInfo grid{{24, 24, 24}, {1, 1, 1}, {0, 0, 0}};
    const std::array<double, 3> centers[3] = {{6, 6, 6}, {17, 17, 6}, {6, 17, 17}};
    std::vector<std::pair<long long, LabelVolume>> series;
    for (int k = 0; k < 7; ++k) {
        std::vector<SphereSpec> spheres;
        spheres.push_back({centers[0], 4.0, 1});
        if (k < 2) spheres.push_back({centers[1], 3.0, 2});  // vanishes at t2
        spheres.push_back({centers[2], 3.5, 3});
        const auto vol = sphere_mask_volume(grid, spheres);
        // Exercise the on-disk format, not just the in-memory structures.
        const std::string sidecar = (base / ("t" + std::to_string(k) + ".json")).string();
        const std::string raw = (base / ("t" + std::to_string(k) + ".raw")).string();
        write_label_volume(sidecar, raw, vol);
        series.emplace_back(60LL * k, read_label_volume(sidecar, raw));
    }

    const auto result = build_trajectories("P1", series);
    c.expect(result.trajectories.size() == 3,
             "expected 3 trajectories, got " + std::to_string(result.trajectories.size()));
    int vanishing = -1;
    for (std::size_t i = 0; i < result.trajectories.size(); ++i)
        if (result.trajectories[i].records[2].volume_mm3 == 0.0) vanishing = static_cast<int>(i);
    c.expect(vanishing >= 0, "no trajectory vanished at t2");

    if (vanishing >= 0) {
        for (std::size_t i = 0; i < result.trajectories.size(); ++i) {
            const auto res = resample_nn(result.trajectories[i]);
            const auto classified = classify_trajectory(res);
            for (std::size_t k = 0; k < classified.size(); ++k) {
                const ResponseCategory expected =
                    (static_cast<int>(i) == vanishing && k >= 1) ? ResponseCategory::CR
                                                                 : ResponseCategory::SD;
                c.expect(classified[k].category == expected,
                         "lesion " + std::to_string(i) + " at t" + std::to_string(k + 1) +
                             ": got " + category_name(classified[k].category));
            }
        }
    }
    fs::remove_all(base);
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_1_rano_oracle();
    criterion_2_auc_oracle();

    const PreparedSynth synth500 = prepare_synth(500, 42);
    criteria_3_4_em(synth500);
    criteria_5_6_gat();

    const PreparedSynth synth800 = prepare_synth(800, 7);
    criterion_7_trend(synth800, nullptr);
    criterion_8_general_contract(synth800);

    criterion_9_statistics();
    criterion_10_determinism();
    criterion_11_mask_path();

    if (g_failures > 0) {
        std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("acceptance: all 11 criteria passed\n");
    return 0;
}
