#include <algorithm>
#include <cmath>
#include <map>

#include "bmt/errors.hpp"
#include "bmt/evalstat.hpp"
#include "bmt/rng.hpp"

namespace bmt {

namespace {

struct PatientGroup {
    std::string id;
    std::vector<std::size_t> rows;
    long long n_pos = 0;
};

}  // namespace

FoldPlan make_fold_plan(const std::vector<std::string>& patient_ids,
                        const std::vector<int>& labels, int n_folds, bool grouped,
                        uint64_t seed) {
    if (patient_ids.size() != labels.size())
        throw ValidationError("evaluate", "patient ids do not match label count");
    if (n_folds < 2) throw ValidationError("evaluate", "need at least 2 folds");
    if (patient_ids.size() < static_cast<std::size_t>(n_folds))
        throw ValidationError("evaluate", "fewer lesions than folds");

    FoldPlan plan;
    plan.n_folds = n_folds;
    plan.seed = seed;
    plan.fold_of_row.assign(patient_ids.size(), -1);
    Rng rng(derive_seed(seed, "fold-plan"));

    if (!grouped) {
        // Classic stratified split: shuffle within each class, deal round-robin.
        std::vector<std::size_t> pos, neg;
        for (std::size_t i = 0; i < labels.size(); ++i)
            (labels[i] == 1 ? pos : neg).push_back(i);
        auto shuffle = [&](std::vector<std::size_t>& v) {
            for (std::size_t i = v.size(); i > 1; --i)
                std::swap(v[i - 1], v[rng.uniform_int(i)]);
        };
        shuffle(pos);
        shuffle(neg);
        for (std::size_t i = 0; i < pos.size(); ++i)
            plan.fold_of_row[pos[i]] = static_cast<int>(i % n_folds);
        for (std::size_t i = 0; i < neg.size(); ++i)
            plan.fold_of_row[neg[i]] = static_cast<int>(i % n_folds);
        return plan;
    }

    // Grouped: all lesions of a patient share a fold. Greedy balance on label
    // counts first, fold size second.
    std::map<std::string, PatientGroup> by_patient;
    for (std::size_t i = 0; i < patient_ids.size(); ++i) {
        auto& g = by_patient[patient_ids[i]];
        g.id = patient_ids[i];
        g.rows.push_back(i);
        g.n_pos += labels[i] == 1 ? 1 : 0;
    }
    std::vector<PatientGroup> groups;
    groups.reserve(by_patient.size());
    for (auto& [_, g] : by_patient) groups.push_back(std::move(g));
    if (groups.size() < static_cast<std::size_t>(n_folds))
        throw ValidationError("evaluate", "fewer patients than folds under grouping");

    // Seeded shuffle breaks ties among equal-sized patients, then a stable
    // sort places large groups first.
    for (std::size_t i = groups.size(); i > 1; --i)
        std::swap(groups[i - 1], groups[rng.uniform_int(i)]);
    std::stable_sort(groups.begin(), groups.end(),
                     [](const PatientGroup& a, const PatientGroup& b) {
                         return a.rows.size() > b.rows.size();
                     });

    // Greedy assignment spreading positive counts evenly (population std of
    // per-fold positives), breaking ties toward the smallest fold. All-negative
    // groups fall through to pure size balancing, so no fold stays empty.
    std::vector<long long> fold_n(n_folds, 0), fold_pos(n_folds, 0);
    auto pos_spread = [&](int fold, long long add) {
        double mean = 0.0;
        for (int f = 0; f < n_folds; ++f)
            mean += static_cast<double>(fold_pos[f]) + (f == fold ? add : 0);
        mean /= n_folds;
        double var = 0.0;
        for (int f = 0; f < n_folds; ++f) {
            const double d = static_cast<double>(fold_pos[f]) + (f == fold ? add : 0) - mean;
            var += d * d;
        }
        return var;
    };
    for (const auto& g : groups) {
        int best = 0;
        double best_spread = 0.0;
        long long best_size = 0;
        for (int f = 0; f < n_folds; ++f) {
            const double spread = pos_spread(f, g.n_pos);
            const long long new_n = fold_n[f] + static_cast<long long>(g.rows.size());
            if (f == 0 || spread < best_spread ||
                (spread == best_spread && new_n < best_size)) {
                best = f;
                best_spread = spread;
                best_size = new_n;
            }
        }
        for (std::size_t r : g.rows) plan.fold_of_row[r] = best;
        fold_n[best] += static_cast<long long>(g.rows.size());
        fold_pos[best] += g.n_pos;
    }
    return plan;
}

}  // namespace bmt
