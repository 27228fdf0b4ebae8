#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bmt/types.hpp"

namespace bmt {

// Trajectory mapped onto the fixed 7-point, 60-day grid. normalized[0] is 1
// exactly; source_index records which observed record supplied each grid
// value (absent for interpolated values).
struct ResampledTrajectory {
    static constexpr int kPoints = 7;
    static constexpr std::array<long long, kPoints> grid_days{0, 60, 120, 180, 240, 300, 360};

    std::string patient_id;
    std::string lesion_id;
    std::array<double, kPoints> volumes{};
    std::array<double, kPoints> normalized{};
    std::array<std::optional<int>, kPoints> source_index{};
    std::array<bool, kPoints> observed{};  // false after imputation
    std::array<std::map<std::string, double>, kPoints> point_features{};
};

enum class ResampleMethod { nearest, linear, bspline };

ResampleMethod parse_resample_method(const std::string& s);
const char* resample_method_name(ResampleMethod m);

// Nearest observed record per grid point; equidistant ties break to the
// earlier record. Point features are carried over from the source record.
ResampledTrajectory resample_nn(const LesionTrajectory& traj);

// Piecewise-linear interpolation, clamped to the nearest endpoint outside the
// observed span. Point features are only present where a grid day coincides
// with a record day.
ResampledTrajectory resample_linear(const LesionTrajectory& traj);

// Interpolating cubic spline with flat clamped ends, floored at zero volume.
// Falls back to linear (with a warning on the returned flag) below 4 records.
ResampledTrajectory resample_bspline(const LesionTrajectory& traj, bool* fell_back = nullptr);

ResampledTrajectory resample(const LesionTrajectory& traj, ResampleMethod method);

// Elementwise division by volumes[0]; element 0 is set to 1 exactly.
std::array<double, ResampledTrajectory::kPoints> normalize_volumes(
    const std::array<double, ResampledTrajectory::kPoints>& volumes);

// ---- interchange ----
// Volumes CSV: patient_id,lesion_id,t0..t6. A parallel file holds the
// normalized vectors in the same layout.
void write_resampled_csv(const std::string& path, const std::vector<ResampledTrajectory>& trajs,
                         bool normalized);
std::vector<ResampledTrajectory> read_resampled_csv(const std::string& path);

}  // namespace bmt
