#include "bmt/response.hpp"

#include <algorithm>
#include <limits>

#include "bmt/resample.hpp"

namespace bmt {

namespace {
// Threshold comparisons carry a relative guard so decimal boundaries behave
// as written (34.3% of a 100 mm^3 baseline is exactly the boundary, not PR):
// the product fraction * volume rounds differently than the literal value.
constexpr double kBoundaryTol = 1e-12;
}  // namespace

ResponseCategory classify_response(double baseline_volume, std::span<const double> prior_volumes,
                                   double current_volume, const ResponseCriteria& criteria) {
    if (baseline_volume <= 0.0)
        throw ValidationError("classify", "invalid trajectory: baseline volume must be positive");
    if (prior_volumes.empty())
        throw ValidationError("classify", "prior volumes must be non-empty");
    if (!(criteria.pr_fraction_of_baseline > 0.0 && criteria.pr_fraction_of_baseline < 1.0 &&
          criteria.pd_fraction_of_nadir > 1.0) ||
        criteria.cr_volume_mm3 < 0.0)
        throw ValidationError("classify", "criteria must satisfy 0 < pr < 1 < pd, cr >= 0");

    double nadir = prior_volumes[0];
    for (double v : prior_volumes) nadir = std::min(nadir, v);
    const double scale = std::max({1.0, baseline_volume, nadir, current_volume});

    if (current_volume <= criteria.cr_volume_mm3) return ResponseCategory::CR;
    if (current_volume - criteria.pd_fraction_of_nadir * nadir > kBoundaryTol * scale)
        return ResponseCategory::PD;
    if (criteria.pr_fraction_of_baseline * baseline_volume - current_volume > kBoundaryTol * scale)
        return ResponseCategory::PR;
    return ResponseCategory::SD;
}

std::vector<ClassifiedPoint> classify_series(std::span<const long long> days,
                                             std::span<const double> volumes,
                                             const ResponseCriteria& criteria) {
    if (volumes.size() < 2)
        throw ValidationError("classify", "insufficient data: need at least 2 time points");
    if (days.size() != volumes.size())
        throw ValidationError("classify", "days/volumes length mismatch");

    const double baseline = volumes[0];
    std::vector<ClassifiedPoint> out;
    out.reserve(volumes.size() - 1);
    double nadir = baseline;  // running minimum of all strictly-prior volumes
    for (std::size_t k = 1; k < volumes.size(); ++k) {
        const double nadir_span[1] = {nadir};
        out.push_back({days[k], classify_response(baseline, nadir_span, volumes[k], criteria)});
        nadir = std::min(nadir, volumes[k]);
    }
    return out;
}

std::vector<ClassifiedPoint> classify_trajectory(const LesionTrajectory& traj,
                                                 const ResponseCriteria& criteria) {
    std::vector<long long> days;
    std::vector<double> volumes;
    days.reserve(traj.records.size());
    volumes.reserve(traj.records.size());
    for (const auto& r : traj.records) {
        days.push_back(r.day);
        volumes.push_back(r.volume_mm3);
    }
    return classify_series(days, volumes, criteria);
}

std::vector<ClassifiedPoint> classify_trajectory(const ResampledTrajectory& traj,
                                                 const ResponseCriteria& criteria) {
    std::vector<long long> days(traj.grid_days.begin(), traj.grid_days.end());
    std::vector<double> volumes(traj.volumes.begin(), traj.volumes.end());
    return classify_series(days, volumes, criteria);
}

std::vector<TransitionFlow> compute_flows(
    const std::vector<std::vector<ResponseCategory>>& classified) {
    if (classified.empty()) return {};
    const std::size_t len = classified.front().size();
    if (len < 2) throw ValidationError("flows", "sequences must have at least 2 time points");
    for (const auto& seq : classified)
        if (seq.size() != len)
            throw ValidationError("flows", "ragged input: all sequences must share one length");

    std::vector<TransitionFlow> flows(len - 1);
    for (std::size_t k = 0; k + 1 < len; ++k) flows[k].interval_index = static_cast<int>(k + 1);
    for (const auto& seq : classified) {
        for (std::size_t k = 0; k + 1 < len; ++k) {
            flows[k].counts[static_cast<int>(seq[k])][static_cast<int>(seq[k + 1])] += 1;
        }
    }
    return flows;
}

}  // namespace bmt
