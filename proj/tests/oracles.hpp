#pragma once

// Independent reference implementations used by the unit and acceptance
// suites. These deliberately avoid the production code paths they check:
// response categories come from explicit condition enumeration over prior
// slices, connectivity from BFS flood fill, AUC from O(n^2) pair counting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <vector>

#include "bmt/response.hpp"
#include "bmt/track.hpp"
#include "bmt/types.hpp"

namespace oracle {

inline bmt::ResponseCategory rano_rule(double baseline, const std::vector<double>& priors,
                                       double current, const bmt::ResponseCriteria& c = {}) {
    const double nadir = *std::min_element(priors.begin(), priors.end());
    const double scale = std::max({1.0, baseline, nadir, current});
    // Same boundary semantics as the rule definition: strict inequality beyond
    // a 1e-12 relative guard, equality falls to SD.
    const bool is_cr = current <= c.cr_volume_mm3;
    const bool is_pd = current - c.pd_fraction_of_nadir * nadir > 1e-12 * scale;
    const bool is_pr = c.pr_fraction_of_baseline * baseline - current > 1e-12 * scale;
    if (is_cr) return bmt::ResponseCategory::CR;
    if (is_pd) return bmt::ResponseCategory::PD;
    if (is_pr) return bmt::ResponseCategory::PR;
    return bmt::ResponseCategory::SD;
}

inline std::vector<bmt::ResponseCategory> rano_series(const std::vector<double>& volumes,
                                                      const bmt::ResponseCriteria& c = {}) {
    std::vector<bmt::ResponseCategory> out;
    for (std::size_t k = 1; k < volumes.size(); ++k) {
        const std::vector<double> priors(volumes.begin(), volumes.begin() + k);
        out.push_back(rano_rule(volumes[0], priors, volumes[k], c));
    }
    return out;
}

// BFS flood fill with 26-connectivity; returns the component count.
inline int flood_fill_count(const bmt::LabelVolume& vol) {
    const int nx = vol.grid.dims[0], ny = vol.grid.dims[1], nz = vol.grid.dims[2];
    auto index = [&](int x, int y, int z) {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(nx) * (y + static_cast<std::size_t>(ny) * z);
    };
    std::vector<char> seen(vol.labels.size(), 0);
    int count = 0;
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const std::size_t start = index(x, y, z);
                if (vol.labels[start] == 0 || seen[start]) continue;
                ++count;
                std::deque<std::array<int, 3>> queue{{x, y, z}};
                seen[start] = 1;
                while (!queue.empty()) {
                    const auto [cx, cy, cz] = queue.front();
                    queue.pop_front();
                    for (int dz = -1; dz <= 1; ++dz) {
                        for (int dy = -1; dy <= 1; ++dy) {
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (dx == 0 && dy == 0 && dz == 0) continue;
                                const int X = cx + dx, Y = cy + dy, Z = cz + dz;
                                if (X < 0 || X >= nx || Y < 0 || Y >= ny || Z < 0 || Z >= nz)
                                    continue;
                                const std::size_t n = index(X, Y, Z);
                                if (vol.labels[n] != 0 && !seen[n]) {
                                    seen[n] = 1;
                                    queue.push_back({X, Y, Z});
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return count;
}

inline double auc_pair_count(const std::vector<int>& labels, const std::vector<double>& scores) {
    double u = 0.0;
    long long n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) ++n_pos;
        else ++n_neg;
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] != 0) continue;
            if (scores[i] > scores[j]) u += 1.0;
            else if (scores[i] == scores[j]) u += 0.5;
        }
    }
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Trapezoidal integration of the ROC curve over score thresholds.
inline double auc_trapezoid(const std::vector<int>& labels, const std::vector<double>& scores) {
    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double n_pos = 0, n_neg = 0;
    for (int y : labels) (y == 1 ? n_pos : n_neg) += 1;
    double tp = 0, fp = 0, prev_tp = 0, prev_fp = 0, area = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]] == 1) tp += 1;
            else fp += 1;
            ++i;
        }
        area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
        prev_tp = tp;
        prev_fp = fp;
    }
    return area / (n_pos * n_neg);
}

// Nearest observed day with ties to the earlier record.
inline int nearest_record(const std::vector<long long>& days, long long target) {
    int best = 0;
    for (std::size_t i = 1; i < days.size(); ++i) {
        if (std::llabs(days[i] - target) < std::llabs(days[best] - target))
            best = static_cast<int>(i);
    }
    return best;
}

}  // namespace oracle
