#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

#include "bmt/csv.hpp"
#include "bmt/errors.hpp"
#include "bmt/evalstat.hpp"
#include "bmt/rng.hpp"

namespace bmt {

namespace {

// Published clinical reference AUCs (clinical cohort, n=896); kept as report
// context only, never asserted against synthetic runs.
struct ReferenceRow {
    const char* task;
    const char* method;
    double auc[6];
    double lo[6];
    double hi[6];
};

constexpr ReferenceRow kReferenceTable[] = {
    {"cr_vs_noncr", "gat_general",
     {0.70, 0.88, 0.91, 0.94, 0.96, 0.98},
     {0.66, 0.86, 0.89, 0.92, 0.95, 0.98},
     {0.73, 0.90, 0.93, 0.95, 0.97, 0.99}},
    {"cr_vs_noncr", "gat_specific",
     {0.76, 0.88, 0.92, 0.94, 0.97, 0.98},
     {0.73, 0.86, 0.89, 0.92, 0.95, 0.97},
     {0.79, 0.91, 0.93, 0.95, 0.98, 0.99}},
    {"cr_vs_noncr", "gbdt",
     {0.77, 0.90, 0.93, 0.95, 0.97, 0.99},
     {0.74, 0.88, 0.91, 0.93, 0.96, 0.98},
     {0.81, 0.92, 0.95, 0.96, 0.98, 0.99}},
    {"resp_vs_nonresp", "gat_general",
     {0.58, 0.78, 0.81, 0.84, 0.87, 0.90},
     {0.54, 0.74, 0.79, 0.82, 0.85, 0.88},
     {0.62, 0.81, 0.84, 0.87, 0.89, 0.92}},
    {"resp_vs_nonresp", "gat_specific",
     {0.61, 0.78, 0.82, 0.85, 0.87, 0.90},
     {0.57, 0.76, 0.79, 0.82, 0.85, 0.88},
     {0.66, 0.81, 0.84, 0.87, 0.89, 0.92}},
    {"resp_vs_nonresp", "gbdt",
     {0.61, 0.82, 0.87, 0.90, 0.93, 0.97},
     {0.57, 0.79, 0.85, 0.88, 0.92, 0.96},
     {0.65, 0.85, 0.89, 0.92, 0.95, 0.98}},
};

FeatureMatrix select_matrix(const FeatureMatrix& src, const std::vector<std::size_t>& rows,
                            int max_time_index) {
    FeatureMatrix out;
    for (std::size_t r : rows) out.rows.push_back(src.rows[r]);
    for (const auto& col : src.columns) {
        if (col.origin == ColumnOrigin::per_time_point && col.time_index > max_time_index)
            continue;
        FeatureColumn c;
        c.name = col.name;
        c.origin = col.origin;
        c.time_index = col.time_index;
        c.one_hot = col.one_hot;
        c.values.reserve(rows.size());
        for (std::size_t r : rows) c.values.push_back(col.values[r]);
        out.columns.push_back(std::move(c));
    }
    return out;
}

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::gbdt: return "gbdt";
        case Method::gat_specific: return "gat_specific";
        case Method::gat_general: return "gat_general";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    if (s == "gbdt") return Method::gbdt;
    if (s == "gat-specific" || s == "gat_specific") return Method::gat_specific;
    if (s == "gat-general" || s == "gat_general") return Method::gat_general;
    throw ValidationError("evaluate", "unknown method", s);
}

std::vector<TemporalGraph> graphs_from_features(const FeatureMatrix& features,
                                                const std::vector<int>& labels) {
    if (features.n_rows() != labels.size())
        throw ValidationError("evaluate", "feature rows do not match label count");
    int max_time = -1;
    for (const auto& col : features.columns)
        if (col.origin == ColumnOrigin::per_time_point)
            max_time = std::max(max_time, col.time_index);
    if (max_time < 0)
        throw ValidationError("evaluate", "feature matrix has no per-time-point columns");

    std::vector<TemporalGraph> graphs;
    graphs.reserve(features.n_rows());
    for (std::size_t r = 0; r < features.n_rows(); ++r) {
        std::vector<std::vector<double>> points(max_time + 1);
        std::vector<double> clinical;
        for (const auto& col : features.columns) {
            if (col.origin == ColumnOrigin::per_time_point)
                points[col.time_index].push_back(col.values[r]);
            else
                clinical.push_back(col.values[r]);
        }
        graphs.push_back(build_graph(points, clinical, labels[r]));
    }
    return graphs;
}

EvalReport run_protocol(const FeatureMatrix& features, const std::vector<int>& labels,
                        const ProtocolOptions& options) {
    const std::size_t n = features.n_rows();
    if (n != labels.size())
        throw ValidationError("evaluate", "feature rows do not match label count");
    if (options.methods.empty()) throw ValidationError("evaluate", "no methods requested");
    for (int h : options.horizons)
        if (h < 0 || h > 5)
            throw ValidationError("evaluate", "horizon out of range", std::to_string(h));

    std::vector<std::string> patient_ids;
    patient_ids.reserve(n);
    for (const auto& [pid, _] : features.rows) patient_ids.push_back(pid);
    const FoldPlan plan = make_fold_plan(patient_ids, labels, options.n_folds, options.grouped,
                                         options.seed);

    EvalReport report;
    report.task = options.task;
    report.horizons = options.horizons;
    report.n_folds = options.n_folds;
    report.seed = options.seed;
    report.cohort_size = n;
    report.grouped_folds = options.grouped;
    {
        long long pos = 0;
        for (int y : labels) pos += y == 1 ? 1 : 0;
        report.prevalence = static_cast<double>(pos) / static_cast<double>(n);
    }

    // scores[method][horizon][row]
    std::vector<std::vector<std::vector<double>>> scores(
        options.methods.size(),
        std::vector<std::vector<double>>(options.horizons.size(), std::vector<double>(n, 0.0)));

    for (int fold = 0; fold < options.n_folds; ++fold) {
        std::vector<std::size_t> train_rows, test_rows;
        for (std::size_t r = 0; r < n; ++r)
            (plan.fold_of_row[r] == fold ? test_rows : train_rows).push_back(r);
        if (train_rows.empty() || test_rows.empty())
            throw ValidationError("evaluate", "empty fold", std::to_string(fold));

        std::function<void(std::size_t)> fit_hook;
        if (options.standardize_access_hook)
            fit_hook = [&](std::size_t row) { options.standardize_access_hook(fold, row); };
        const StandardizationParams std_params = standardize_fit(features, train_rows, fit_hook);
        const FeatureMatrix standardized = standardize_apply(std_params, features);

        std::vector<int> train_labels, test_labels;
        for (std::size_t r : train_rows) train_labels.push_back(labels[r]);
        for (std::size_t r : test_rows) test_labels.push_back(labels[r]);

        for (std::size_t mi = 0; mi < options.methods.size(); ++mi) {
            const Method method = options.methods[mi];
            if (method == Method::gbdt) {
                for (std::size_t hi = 0; hi < options.horizons.size(); ++hi) {
                    const int horizon = options.horizons[hi];
                    const FeatureMatrix train_m = select_matrix(standardized, train_rows, horizon);
                    const FeatureMatrix test_m = select_matrix(standardized, test_rows, horizon);
                    GbdtConfig cfg = options.gbdt;
                    cfg.seed = derive_seed(options.seed, "gbdt-fold",
                                           static_cast<uint64_t>(fold) * 16 + horizon);
                    const GbdtModel model = gbdt_fit(train_m, train_labels, cfg);
                    const std::vector<double> p = gbdt_predict_proba(model, test_m);
                    for (std::size_t i = 0; i < test_rows.size(); ++i)
                        scores[mi][hi][test_rows[i]] = p[i];
                }
            } else {
                const FeatureMatrix train_m = select_matrix(standardized, train_rows, 5);
                const FeatureMatrix test_m = select_matrix(standardized, test_rows, 5);
                const std::vector<TemporalGraph> train_graphs =
                    graphs_from_features(train_m, train_labels);
                const std::vector<TemporalGraph> test_graphs =
                    graphs_from_features(test_m, test_labels);
                if (method == Method::gat_general) {
                    TrainConfig cfg = options.gat;
                    cfg.mode = GatMode::general;
                    cfg.seed = derive_seed(options.seed, "gat-general-fold", fold);
                    const TrainedGat model = gat_train(train_graphs, cfg);
                    for (std::size_t hi = 0; hi < options.horizons.size(); ++hi) {
                        const std::vector<double> p =
                            gat_predict(model, test_graphs, options.horizons[hi]);
                        for (std::size_t i = 0; i < test_rows.size(); ++i)
                            scores[mi][hi][test_rows[i]] = p[i];
                    }
                } else {
                    for (std::size_t hi = 0; hi < options.horizons.size(); ++hi) {
                        const int horizon = options.horizons[hi];
                        TrainConfig cfg = options.gat;
                        cfg.mode = GatMode::time_specific;
                        cfg.horizon = horizon;
                        cfg.seed = derive_seed(options.seed, "gat-specific-fold",
                                               static_cast<uint64_t>(fold) * 16 + horizon);
                        const TrainedGat model = gat_train(train_graphs, cfg);
                        const std::vector<double> p = gat_predict(model, test_graphs, horizon);
                        for (std::size_t i = 0; i < test_rows.size(); ++i)
                            scores[mi][hi][test_rows[i]] = p[i];
                    }
                }
            }
        }
    }

    for (std::size_t mi = 0; mi < options.methods.size(); ++mi) {
        MethodOutcome outcome;
        outcome.method = options.methods[mi];
        for (std::size_t hi = 0; hi < options.horizons.size(); ++hi) {
            EvalCell cell;
            cell.horizon = options.horizons[hi];
            cell.n = n;
            cell.auc = auc(labels, scores[mi][hi]);
            const auto ci = bootstrap_ci(labels, scores[mi][hi], options.n_boot,
                                         derive_seed(options.seed, "ci",
                                                     mi * 16 + options.horizons[hi]));
            cell.ci_lo = ci.first;
            cell.ci_hi = ci.second;
            outcome.cells.push_back(cell);

            std::vector<PooledScore> pooled;
            pooled.reserve(n);
            for (std::size_t r = 0; r < n; ++r)
                pooled.push_back(PooledScore{features.rows[r].first, features.rows[r].second,
                                             labels[r], scores[mi][hi][r]});
            outcome.pooled.push_back(std::move(pooled));
        }
        report.methods.push_back(std::move(outcome));
    }

    for (std::size_t a = 0; a < options.methods.size(); ++a) {
        for (std::size_t b = a + 1; b < options.methods.size(); ++b) {
            for (std::size_t hi = 0; hi < options.horizons.size(); ++hi) {
                PairwisePValue pv;
                pv.method_a = options.methods[a];
                pv.method_b = options.methods[b];
                pv.horizon = options.horizons[hi];
                pv.p_value = permutation_test(
                    labels, scores[a][hi], scores[b][hi], options.n_perm,
                    derive_seed(options.seed, "perm", (a * 8 + b) * 16 + options.horizons[hi]));
                report.pvalues.push_back(pv);
            }
        }
    }
    return report;
}

void write_eval_report_json(const std::string& path, const EvalReport& report) {
    nlohmann::json j;
    j["task"] = task_name(report.task);
    j["horizons"] = report.horizons;
    j["n_folds"] = report.n_folds;
    j["seed"] = report.seed;
    j["cohort_size"] = report.cohort_size;
    j["grouped_folds"] = report.grouped_folds;
    j["prevalence"] = report.prevalence;
    auto& methods = j["methods"] = nlohmann::json::object();
    for (const auto& m : report.methods) {
        auto& cells = methods[method_name(m.method)] = nlohmann::json::array();
        for (const auto& c : m.cells) {
            cells.push_back({{"horizon", c.horizon},
                             {"auc", c.auc},
                             {"ci95", {c.ci_lo, c.ci_hi}},
                             {"n", c.n}});
        }
    }
    auto& pvals = j["pvalues"] = nlohmann::json::array();
    for (const auto& p : report.pvalues) {
        pvals.push_back({{"method_a", method_name(p.method_a)},
                         {"method_b", method_name(p.method_b)},
                         {"horizon", p.horizon},
                         {"p_value", p.p_value}});
    }
    auto& ref = j["reference"] = nlohmann::json::object();
    ref["note"] = "published clinical-cohort AUCs (n=896); context only, not reproducible "
                  "from synthetic cohorts";
    ref["reference_only"] = true;
    auto& rows = ref["rows"] = nlohmann::json::array();
    for (const auto& row : kReferenceTable) {
        nlohmann::json cells = nlohmann::json::array();
        for (int h = 0; h < 6; ++h)
            cells.push_back(
                {{"horizon", h}, {"auc", row.auc[h]}, {"ci95", {row.lo[h], row.hi[h]}}});
        rows.push_back({{"task", row.task}, {"method", row.method}, {"cells", cells}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("evaluate", "cannot write file", path);
    out << j.dump(2) << '\n';
}

void write_eval_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("evaluate", "cannot write file", path);
    std::vector<std::string> header = {"task", "method"};
    for (int h : report.horizons) header.push_back("t0:t" + std::to_string(h));
    write_csv_row(out, header);
    for (const auto& m : report.methods) {
        std::vector<std::string> row = {task_name(report.task), method_name(m.method)};
        for (const auto& c : m.cells) {
            row.push_back(format_double(c.auc) + " [" + format_double(c.ci_lo) + ", " +
                          format_double(c.ci_hi) + "]");
        }
        write_csv_row(out, row);
    }
}

void write_pvalues_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("evaluate", "cannot write file", path);
    write_csv_row(out, {"method_a", "method_b", "horizon", "p_value"});
    for (const auto& p : report.pvalues)
        write_csv_row(out, {method_name(p.method_a), method_name(p.method_b),
                            std::to_string(p.horizon), format_double(p.p_value)});
}

void write_pooled_scores_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("evaluate", "cannot write file", path);
    write_csv_row(out, {"method", "horizon", "patient_id", "lesion_id", "label", "score"});
    for (const auto& m : report.methods) {
        for (std::size_t hi = 0; hi < m.pooled.size(); ++hi) {
            for (const auto& s : m.pooled[hi]) {
                write_csv_row(out, {method_name(m.method),
                                    std::to_string(m.cells[hi].horizon), s.patient_id,
                                    s.lesion_id, std::to_string(s.label),
                                    format_double(s.score)});
            }
        }
    }
}

}  // namespace bmt
