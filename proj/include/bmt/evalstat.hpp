#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bmt/featspace.hpp"
#include "bmt/gbdt.hpp"
#include "bmt/tgat.hpp"
#include "bmt/types.hpp"

namespace bmt {

// ---- targets ----

enum class TaskKind { cr_vs_noncr, resp_vs_nonresp };

const char* task_name(TaskKind t);
TaskKind parse_task(const std::string& s);

// Task 1: CR -> 1; task 2: CR or PR -> 1.
std::vector<int> make_targets(const std::vector<ResponseCategory>& t6_categories, TaskKind task);

// ---- metrics ----

// Mann-Whitney AUC: fraction of (positive, negative) pairs ordered correctly,
// ties counted 1/2. Equals trapezoidal ROC integration.
double auc(const std::vector<int>& labels, const std::vector<double>& scores);

// Percentile bootstrap over (label, score) pairs; single-class resamples are
// redrawn. Deterministic given the seed.
std::pair<double, double> bootstrap_ci(const std::vector<int>& labels,
                                       const std::vector<double>& scores, int n_boot = 1000,
                                       uint64_t seed = 0);

// Paired permutation test on |AUC_a - AUC_b|: scores swap sides per lesion
// with probability 1/2; p = (1 + #{stat >= observed}) / (n_perm + 1).
double permutation_test(const std::vector<int>& labels, const std::vector<double>& scores_a,
                        const std::vector<double>& scores_b, int n_perm = 1000,
                        uint64_t seed = 0);

// Permutation-invariant agreement between two hard clusterings.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// ---- cross-validation ----

struct FoldPlan {
    int n_folds = 5;
    std::vector<int> fold_of_row;
    uint64_t seed = 0;
};

// Stratified by label; when grouped, all lesions of a patient share a fold.
FoldPlan make_fold_plan(const std::vector<std::string>& patient_ids,
                        const std::vector<int>& labels, int n_folds = 5, bool grouped = true,
                        uint64_t seed = 0);

// ---- protocol ----

enum class Method { gbdt, gat_specific, gat_general };

const char* method_name(Method m);
Method parse_method(const std::string& s);

struct EvalCell {
    int horizon = 0;
    double auc = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n = 0;
};

struct PooledScore {
    std::string patient_id;
    std::string lesion_id;
    int label = 0;
    double score = 0.0;
};

struct MethodOutcome {
    Method method = Method::gbdt;
    std::vector<EvalCell> cells;                         // one per horizon
    std::vector<std::vector<PooledScore>> pooled;        // per horizon
};

struct PairwisePValue {
    Method method_a = Method::gbdt;
    Method method_b = Method::gbdt;
    int horizon = 0;
    double p_value = 1.0;
};

struct EvalReport {
    TaskKind task = TaskKind::cr_vs_noncr;
    std::vector<int> horizons;
    std::vector<MethodOutcome> methods;
    std::vector<PairwisePValue> pvalues;
    double prevalence = 0.0;  // positive-label fraction of the cohort
    int n_folds = 5;
    uint64_t seed = 0;
    std::size_t cohort_size = 0;
    bool grouped_folds = true;
};

struct ProtocolOptions {
    TaskKind task = TaskKind::resp_vs_nonresp;
    std::vector<Method> methods = {Method::gbdt};
    std::vector<int> horizons = {0, 1, 2, 3, 4, 5};
    int n_folds = 5;
    bool grouped = true;
    int n_boot = 1000;
    int n_perm = 1000;
    uint64_t seed = 0;
    GbdtConfig gbdt;
    TrainConfig gat;
    // Leakage instrumentation: observes every row index the fold-wise
    // standardization fit reads.
    std::function<void(int fold, std::size_t row)> standardize_access_hook;
};

// Per fold: fit standardization on the training rows, apply everywhere, train
// each method (gat_general once per fold, others once per horizon), score the
// test rows; pool across folds and attach AUC + bootstrap CI per horizon plus
// pairwise permutation p-values.
EvalReport run_protocol(const FeatureMatrix& features, const std::vector<int>& labels,
                        const ProtocolOptions& options);

// Table-shaped JSON/CSV report. The JSON carries the published clinical
// reference AUCs in a footer flagged as non-reproducible context.
void write_eval_report_json(const std::string& path, const EvalReport& report);
void write_eval_report_csv(const std::string& path, const EvalReport& report);
void write_pvalues_csv(const std::string& path, const EvalReport& report);
void write_pooled_scores_csv(const std::string& path, const EvalReport& report);

// Builds one temporal graph per feature-matrix row: per-time-point blocks
// become node features (clinical columns replicated per node).
std::vector<TemporalGraph> graphs_from_features(const FeatureMatrix& features,
                                                const std::vector<int>& labels);

}  // namespace bmt
