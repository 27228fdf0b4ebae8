#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "bmt/errors.hpp"
#include "bmt/evalstat.hpp"
#include "bmt/rng.hpp"

namespace bmt {

namespace {

void check_binary(const std::vector<int>& labels, const char* stage) {
    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        if (y == 1) has_pos = true;
        else if (y == 0) has_neg = true;
        else throw ValidationError(stage, "labels must be 0 or 1");
    }
    if (!has_pos || !has_neg)
        throw ValidationError(stage, "AUC undefined: both classes must be present");
}

double auc_unchecked(const std::vector<int>& labels, const std::vector<double>& scores) {
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double u = 0.0;
    double below_neg = 0.0;
    long long n_pos = 0, n_neg = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        long long tie_pos = 0, tie_neg = 0;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            if (labels[order[j]] == 1) ++tie_pos;
            else ++tie_neg;
            ++j;
        }
        u += static_cast<double>(tie_pos) * (below_neg + 0.5 * static_cast<double>(tie_neg));
        below_neg += static_cast<double>(tie_neg);
        n_pos += tie_pos;
        n_neg += tie_neg;
        i = j;
    }
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Linear-interpolated quantile over a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double h = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

double binom2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

const char* task_name(TaskKind t) {
    return t == TaskKind::cr_vs_noncr ? "cr_vs_noncr" : "resp_vs_nonresp";
}

TaskKind parse_task(const std::string& s) {
    if (s == "cr" || s == "cr_vs_noncr") return TaskKind::cr_vs_noncr;
    if (s == "resp" || s == "resp_vs_nonresp") return TaskKind::resp_vs_nonresp;
    throw ValidationError("evaluate", "unknown task", s);
}

std::vector<int> make_targets(const std::vector<ResponseCategory>& t6_categories,
                              TaskKind task) {
    std::vector<int> out;
    out.reserve(t6_categories.size());
    for (ResponseCategory c : t6_categories) {
        const bool positive = task == TaskKind::cr_vs_noncr
                                  ? c == ResponseCategory::CR
                                  : (c == ResponseCategory::CR || c == ResponseCategory::PR);
        out.push_back(positive ? 1 : 0);
    }
    return out;
}

double auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size())
        throw ValidationError("evaluate", "labels/scores length mismatch");
    check_binary(labels, "evaluate");
    return auc_unchecked(labels, scores);
}

std::pair<double, double> bootstrap_ci(const std::vector<int>& labels,
                                       const std::vector<double>& scores, int n_boot,
                                       uint64_t seed) {
    if (labels.size() != scores.size())
        throw ValidationError("evaluate", "labels/scores length mismatch");
    check_binary(labels, "evaluate");
    const std::size_t n = labels.size();
    Rng rng(derive_seed(seed, "bootstrap"));
    std::vector<double> aucs;
    aucs.reserve(n_boot);
    std::vector<int> blabels(n);
    std::vector<double> bscores(n);
    for (int b = 0; b < n_boot; ++b) {
        int attempts = 0;
        for (;;) {
            bool has_pos = false, has_neg = false;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t pick = rng.uniform_int(n);
                blabels[i] = labels[pick];
                bscores[i] = scores[pick];
                (blabels[i] == 1 ? has_pos : has_neg) = true;
            }
            if (has_pos && has_neg) break;
            if (++attempts > 1000)
                throw ValidationError("evaluate",
                                      "bootstrap could not draw a two-class resample");
        }
        aucs.push_back(auc_unchecked(blabels, bscores));
    }
    std::sort(aucs.begin(), aucs.end());
    return {quantile_sorted(aucs, 0.025), quantile_sorted(aucs, 0.975)};
}

double permutation_test(const std::vector<int>& labels, const std::vector<double>& scores_a,
                        const std::vector<double>& scores_b, int n_perm, uint64_t seed) {
    if (labels.size() != scores_a.size() || labels.size() != scores_b.size())
        throw ValidationError("evaluate", "scores must be aligned to the same lesions");
    check_binary(labels, "evaluate");
    const double observed =
        std::fabs(auc_unchecked(labels, scores_a) - auc_unchecked(labels, scores_b));
    Rng rng(derive_seed(seed, "permutation"));
    const std::size_t n = labels.size();
    std::vector<double> pa(n), pb(n);
    long long at_least = 0;
    for (int it = 0; it < n_perm; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.uniform01() < 0.5) {
                pa[i] = scores_b[i];
                pb[i] = scores_a[i];
            } else {
                pa[i] = scores_a[i];
                pb[i] = scores_b[i];
            }
        }
        const double stat = std::fabs(auc_unchecked(labels, pa) - auc_unchecked(labels, pb));
        if (stat >= observed) ++at_least;
    }
    return (1.0 + static_cast<double>(at_least)) / (static_cast<double>(n_perm) + 1.0);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size())
        throw ValidationError("evaluate", "clusterings must have equal length");
    if (a.empty()) return 1.0;
    std::map<std::pair<int, int>, long long> contingency;
    std::map<int, long long> row_sums, col_sums;
    for (std::size_t i = 0; i < a.size(); ++i) {
        contingency[{a[i], b[i]}] += 1;
        row_sums[a[i]] += 1;
        col_sums[b[i]] += 1;
    }
    double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [_, c] : contingency) sum_cells += binom2(static_cast<double>(c));
    for (const auto& [_, c] : row_sums) sum_rows += binom2(static_cast<double>(c));
    for (const auto& [_, c] : col_sums) sum_cols += binom2(static_cast<double>(c));
    const double total = binom2(static_cast<double>(a.size()));
    const double expected = sum_rows * sum_cols / total;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;  // both partitions trivial
    return (sum_cells - expected) / (max_index - expected);
}

}  // namespace bmt
