#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bmt/ingest.hpp"
#include "bmt/resample.hpp"
#include "bmt/track.hpp"
#include "bmt/types.hpp"

namespace bmt {

// Replaces an isolated zero (positive neighbors on both sides) by the
// time-weighted linear interpolation of its neighbors, for the volume and all
// per-point numeric features; marks the point as not observed. Terminal zero
// runs and multi-point dips are left alone.
ResampledTrajectory impute_noisy_points(const ResampledTrajectory& traj);

// Built-in mask-shape features of one component: volume_mm3, voxel_count,
// surface_area_mm2 (exposed-face counting), sphericity, max_axis_extent_mm
// and the centroid coordinates. An empty component yields all zeros.
std::map<std::string, double> shape_features(const LesionComponent& comp, const GridInfo& grid);

// ---- clinical encoding ----

struct ClinicalBlock {
    std::vector<std::string> column_names;       // deterministic order
    std::vector<std::vector<double>> rows;       // one row per requested lesion
};

// Numeric variables pass through (missing -> 0); categorical variables are
// one-hot over the categories observed in the full table, in alphabetical
// column order (missing -> all-zero row). A variable is numeric when every
// observed value parses as a number.
ClinicalBlock encode_clinical(const ClinicalTable& table,
                              const std::vector<std::pair<std::string, std::string>>& lesions);

// ---- feature matrix ----

enum class ColumnOrigin { per_time_point, clinical };

struct FeatureColumn {
    std::string name;
    ColumnOrigin origin = ColumnOrigin::per_time_point;
    int time_index = -1;  // k for per-time-point columns, -1 for clinical
    bool one_hot = false;
    std::vector<double> values;  // column-major storage
};

struct FeatureMatrix {
    std::vector<std::pair<std::string, std::string>> rows;  // (patient_id, lesion_id)
    std::vector<FeatureColumn> columns;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_cols() const { return columns.size(); }
    int column_index(const std::string& name) const;
};

struct AssembleOptions {
    int horizon = 5;  // include time points t0..t{horizon}
    bool include_volume = true;
    bool include_shape = false;     // per-point features named shape_*
    bool include_injected = false;  // all other per-point features
    bool include_clinical = false;
};

// Concatenates per-time-point blocks (column suffix "@tk") for k <= horizon,
// then the clinical block once. Column order is deterministic. Requested
// injected features missing for any lesion raise an error listing them.
FeatureMatrix assemble(const std::vector<ResampledTrajectory>& trajs,
                       const ClinicalTable* clinical, const AssembleOptions& options);

void write_feature_csv(const std::string& path, const FeatureMatrix& matrix);

// ---- fold-wise standardization ----

struct StandardizationParams {
    std::vector<double> mean;
    std::vector<double> sigma;       // population standard deviation
    std::vector<bool> zero_sigma;    // constant columns map to 0
};

// Per-column mean and population sigma over the given training rows only.
// The row-access hook, when set, observes every row index read (leakage
// instrumentation for tests).
StandardizationParams standardize_fit(const FeatureMatrix& matrix,
                                      const std::vector<std::size_t>& train_rows,
                                      const std::function<void(std::size_t)>& row_access_hook = {});

FeatureMatrix standardize_apply(const StandardizationParams& params, const FeatureMatrix& matrix);

void write_standardization_json(const std::string& path, const StandardizationParams& params,
                                const FeatureMatrix& matrix);

}  // namespace bmt
