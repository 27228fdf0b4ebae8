#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bmt/ingest.hpp"
#include "bmt/track.hpp"
#include "bmt/types.hpp"

namespace bmt {

// One growth archetype: a piecewise-linear relative-volume curve over
// normalized time u = day/360 with shape(0) = 1, multiplicative lognormal
// noise, a mixing weight and a baseline-volume log-median. The curve shapes
// are qualitative calibrations, not measured values; tests rely only on their
// categorical consequences.
struct ArchetypeSpec {
    int id = 0;
    std::vector<std::pair<double, double>> control_points;  // (u, relative volume)
    double noise_sigma = 0.15;   // lognormal sigma of the multiplicative noise
    double mixing_weight = 0.2;
    double baseline_log_median = 0.0;  // ln of the baseline-volume median

    double shape(double u) const;  // clamped outside the control range
};

// The five dominant patterns: 0 early complete response, 1 pseudoprogression
// (transient swell then deep response), 2 partial shrinkage with mixed
// outcome, 3 rapid progression, 4 gradual accelerating progression.
std::vector<ArchetypeSpec> default_archetypes();

struct SynthConfig {
    std::size_t n_lesions = 500;
    uint64_t seed = 42;
    double noise_scale = 1.0;  // 0 disables volume noise
    double mean_interval_days = 60.0;
    double interval_sigma_days = 20.0;
    double min_span_days = 360.0;
    double lesions_per_patient = 4.0;  // Poisson rate on top of 1
    std::vector<ArchetypeSpec> archetypes = default_archetypes();
};

struct GeneratedCohort {
    std::vector<LesionTrajectory> trajectories;
    std::vector<int> archetype_labels;  // aligned with trajectories
    ClinicalTable clinical;
};

// Irregular schedules (day 0 then ~Normal(60,20)-day increments clipped to
// [30,119] until the span reaches min_span_days), baseline volumes lognormal
// around per-archetype medians, volumes = baseline * shape(day/360) * noise.
// Deterministic per seed; lesions get independent derived streams.
GeneratedCohort generate(const SynthConfig& config);

struct CohortTargets {
    std::vector<ResponseCategory> t6_categories;
    std::vector<int> cr_labels;    // CR vs non-CR
    std::vector<int> resp_labels;  // responding {CR, PR} vs the rest
};

// End-to-end through the real pipeline: NN resample -> imputation -> RANO
// classification -> binary targets.
CohortTargets label_targets(const GeneratedCohort& cohort);

void write_labels_csv(const std::string& path, const GeneratedCohort& cohort);
void write_clinical_csv(const std::string& path, const ClinicalTable& table);

struct SphereSpec {
    std::array<double, 3> center_mm{};
    double radius_mm = 0.0;
    uint16_t label = 1;
};

// Minimal mask emitter for the image-path tests: voxels whose centers fall
// inside any sphere get that sphere's label.
LabelVolume sphere_mask_volume(const GridInfo& grid, const std::vector<SphereSpec>& spheres);

}  // namespace bmt
