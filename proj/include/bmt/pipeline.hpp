#pragma once

#include <vector>

#include "bmt/featspace.hpp"
#include "bmt/ingest.hpp"
#include "bmt/resample.hpp"
#include "bmt/response.hpp"
#include "bmt/types.hpp"

namespace bmt {

// Composition helpers shared by the CLI subcommands and the evaluation
// harness: cohort QC -> resampling -> imputation -> classification.

struct PipelineOptions {
    bool apply_qc = true;
    bool include_flagged = false;  // keep flagged trajectories anyway
    bool impute = true;
    ResampleMethod method = ResampleMethod::nearest;
    CohortCriteria cohort_criteria;
    ResponseCriteria response_criteria;
    double cr_swing_rebound_fraction = 0.10;
    int cr_swing_rebound_count = 2;
};

struct PreparedCohort {
    std::vector<LesionTrajectory> kept;
    std::vector<QcFlag> flags;
    std::vector<ResampledTrajectory> resampled;
    std::vector<std::vector<ResponseCategory>> classified;  // t1..t6 per lesion
    std::vector<ResponseCategory> t6_categories;
};

PreparedCohort prepare_cohort(const std::vector<LesionTrajectory>& trajectories,
                              const PipelineOptions& options = {});

// Rebuilds a feature matrix from its CSV form; column origins are recovered
// from the "@tk" name suffix (clinical columns carry none).
FeatureMatrix read_feature_csv(const std::string& path);

}  // namespace bmt
