#pragma once

#include <array>
#include <span>
#include <vector>

#include "bmt/types.hpp"

namespace bmt {

struct ResampledTrajectory;  // resample.hpp

// Classify the volume at one time point against baseline and the minimum of
// all strictly-prior volumes (the nadir; prior_volumes starts with the
// baseline). Precedence: CR, then PD, then PR, then SD; boundary equality
// falls to SD.
ResponseCategory classify_response(double baseline_volume, std::span<const double> prior_volumes,
                                   double current_volume,
                                   const ResponseCriteria& criteria = {});

struct ClassifiedPoint {
    long long day = 0;
    ResponseCategory category = ResponseCategory::SD;
};

// One category per time point from index 1 on (day 0 is the treatment
// reference and is never classified).
std::vector<ClassifiedPoint> classify_trajectory(const LesionTrajectory& traj,
                                                 const ResponseCriteria& criteria = {});
std::vector<ClassifiedPoint> classify_trajectory(const ResampledTrajectory& traj,
                                                 const ResponseCriteria& criteria = {});
// Core rule over plain (day, volume) series; volumes[0] is the baseline.
std::vector<ClassifiedPoint> classify_series(std::span<const long long> days,
                                             std::span<const double> volumes,
                                             const ResponseCriteria& criteria = {});

// Category transition counts between consecutive time points, the data behind
// a Sankey flow rendering.
struct TransitionFlow {
    int interval_index = 0;  // transition t_k -> t_{k+1}
    std::array<std::array<long long, 4>, 4> counts{};  // [from][to]

    long long total() const {
        long long t = 0;
        for (const auto& row : counts)
            for (long long c : row) t += c;
        return t;
    }
};

// Sequences must share one length L >= 2 (the classified grid, t1..t6 in the
// standard pipeline); returns L-1 matrices.
std::vector<TransitionFlow> compute_flows(
    const std::vector<std::vector<ResponseCategory>>& classified);

}  // namespace bmt
