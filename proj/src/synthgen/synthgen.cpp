#include "bmt/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "bmt/csv.hpp"
#include "bmt/errors.hpp"
#include "bmt/evalstat.hpp"
#include "bmt/featspace.hpp"
#include "bmt/resample.hpp"
#include "bmt/response.hpp"
#include "bmt/rng.hpp"

namespace bmt {

double ArchetypeSpec::shape(double u) const {
    const auto& cp = control_points;
    if (cp.empty()) return 1.0;
    if (u <= cp.front().first) return cp.front().second;
    if (u >= cp.back().first) return cp.back().second;
    std::size_t hi = 1;
    while (cp[hi].first < u) ++hi;
    const double t = (u - cp[hi - 1].first) / (cp[hi].first - cp[hi - 1].first);
    return (1.0 - t) * cp[hi - 1].second + t * cp[hi].second;
}

std::vector<ArchetypeSpec> default_archetypes() {
    std::vector<ArchetypeSpec> a(5);
    // 0: complete response before the first follow-up window (day 24 on);
    // every post-baseline scan reads zero, so the cluster is a single tight
    // zero pattern rather than a family of zero-onset timings.
    a[0] = {0, {{0.0, 1.0}, {0.065, 0.0}, {1.0, 0.0}}, 0.15, 0.55, std::log(55.0)};
    // 1: pseudoprogression: transient swell, then deep response.
    a[1] = {1, {{0.0, 1.0}, {0.2, 1.8}, {0.45, 0.8}, {0.7, 0.3}, {1.0, 0.12}}, 0.15, 0.12,
            std::log(58.0)};
    // 2: moderate shrinkage settling near half the baseline; mixed outcomes.
    a[2] = {2, {{0.0, 1.0}, {0.25, 0.7}, {0.5, 0.55}, {1.0, 0.5}}, 0.15, 0.13,
            std::log(60.0)};
    // 3: rapid progression from the first follow-up.
    a[3] = {3, {{0.0, 1.0}, {1.0 / 12.0, 1.85}, {1.0 / 3.0, 2.6}, {2.0 / 3.0, 4.2}, {1.0, 6.0}},
            0.15, 0.08, std::log(75.0)};
    // 4: gradual but accelerating growth.
    a[4] = {4, {{0.0, 1.0}, {0.3, 1.1}, {0.6, 1.7}, {0.8, 2.2}, {1.0, 3.0}}, 0.15, 0.12,
            std::log(70.0)};
    return a;
}

namespace {

int poisson(Rng& rng, double lambda) {
    const double limit = std::exp(-lambda);
    int k = 0;
    double product = rng.uniform01();
    while (product > limit) {
        ++k;
        product *= rng.uniform01();
    }
    return k;
}

int draw_archetype(Rng& rng, const std::vector<ArchetypeSpec>& archetypes) {
    double total = 0.0;
    for (const auto& a : archetypes) total += a.mixing_weight;
    double target = rng.uniform01() * total;
    for (std::size_t i = 0; i < archetypes.size(); ++i) {
        target -= archetypes[i].mixing_weight;
        if (target <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(archetypes.size()) - 1;
}

const char* kLocations[] = {"frontal", "parietal",  "temporal",
                            "occipital", "cerebellum", "brainstem"};
const char* kPrimaries[] = {"Lung", "Melanoma", "Breast", "Unknown", "Kidney", "Other"};
const double kPrimaryWeights[] = {0.49, 0.21, 0.11, 0.08, 0.05, 0.06};

}  // namespace

GeneratedCohort generate(const SynthConfig& config) {
    if (config.n_lesions < 10)
        throw ValidationError("synth", "need at least 10 lesions",
                              std::to_string(config.n_lesions));
    if (config.mean_interval_days <= 0.0 || config.interval_sigma_days < 0.0 ||
        config.min_span_days <= 0.0)
        throw ValidationError("synth", "invalid schedule parameters");

    GeneratedCohort cohort;
    Rng patient_rng(derive_seed(config.seed, "synth-patients"));

    std::size_t lesion_counter = 0;
    int patient_counter = 0;
    while (lesion_counter < config.n_lesions) {
        ++patient_counter;
        char pid[16];
        std::snprintf(pid, sizeof(pid), "P%04d", patient_counter);

        const int per_patient = 1 + poisson(patient_rng, config.lesions_per_patient);
        const int take = static_cast<int>(std::min<std::size_t>(
            per_patient, config.n_lesions - lesion_counter));

        // Patient-level covariates.
        const double age = std::round(patient_rng.normal(63.0, 11.0));
        const char* sex = patient_rng.uniform01() < 0.53 ? "Female" : "Male";
        const char* primary = kPrimaries[5];
        {
            double target = patient_rng.uniform01();
            for (int i = 0; i < 6; ++i) {
                target -= kPrimaryWeights[i];
                if (target <= 0.0) {
                    primary = kPrimaries[i];
                    break;
                }
            }
        }
        cohort.clinical.entries[{pid, "", "age"}] = format_double(age);
        cohort.clinical.entries[{pid, "", "sex"}] = sex;
        cohort.clinical.entries[{pid, "", "primary"}] = primary;

        double total_burden = 0.0;
        std::vector<std::string> lesion_ids;
        for (int l = 0; l < take; ++l) {
            ++lesion_counter;
            char lid[16];
            std::snprintf(lid, sizeof(lid), "L%05zu", lesion_counter);
            lesion_ids.emplace_back(lid);

            Rng rng(derive_seed(config.seed, "synth-lesion", lesion_counter));
            const int archetype = draw_archetype(rng, config.archetypes);
            const ArchetypeSpec& spec = config.archetypes[archetype];

            const double baseline = rng.lognormal(spec.baseline_log_median, 1.0);
            total_burden += baseline;

            LesionTrajectory traj;
            traj.patient_id = pid;
            traj.lesion_id = lid;

            // Clipped-normal increments can rarely average above the 90-day
            // inclusion bound; redraw the schedule so generated cohorts pass
            // the cohort criteria by construction.
            std::vector<long long> days;
            for (int attempt = 0; attempt < 100; ++attempt) {
                days = {0};
                while (static_cast<double>(days.back()) < config.min_span_days) {
                    double step =
                        rng.normal(config.mean_interval_days, config.interval_sigma_days);
                    step = std::clamp(step, 30.0, 119.0);
                    days.push_back(days.back() + static_cast<long long>(std::llround(step)));
                }
                const double mean_interval =
                    static_cast<double>(days.back()) / static_cast<double>(days.size() - 1);
                if (mean_interval <= 90.0) break;
            }
            for (long long day : days) {
                ScanRecord rec;
                rec.day = day;
                const double u = static_cast<double>(day) / 360.0;
                double noise = 1.0;
                if (config.noise_scale > 0.0 && spec.noise_sigma > 0.0)
                    noise = rng.lognormal(0.0, config.noise_scale * spec.noise_sigma);
                rec.volume_mm3 = day == 0 ? baseline : baseline * spec.shape(u) * noise;
                // One derived per-point feature exercises the injected-feature
                // path end to end (stands in for externally computed radiomics).
                rec.features["log1p_volume"] = std::log1p(rec.volume_mm3);
                traj.records.push_back(rec);
            }

            cohort.clinical.entries[{pid, lid, "location"}] =
                kLocations[rng.uniform_int(6)];

            cohort.trajectories.push_back(std::move(traj));
            cohort.archetype_labels.push_back(archetype);
        }
        cohort.clinical.entries[{pid, "", "lesion_count"}] = std::to_string(take);
        cohort.clinical.entries[{pid, "", "total_burden_mm3"}] = format_double(total_burden);
    }
    return cohort;
}

CohortTargets label_targets(const GeneratedCohort& cohort) {
    CohortTargets targets;
    std::vector<ResponseCategory> t6;
    for (const auto& traj : cohort.trajectories) {
        const ResampledTrajectory res = impute_noisy_points(resample_nn(traj));
        const auto classified = classify_trajectory(res);
        t6.push_back(classified.back().category);
    }
    targets.t6_categories = t6;
    targets.cr_labels = make_targets(t6, TaskKind::cr_vs_noncr);
    targets.resp_labels = make_targets(t6, TaskKind::resp_vs_nonresp);
    return targets;
}

void write_labels_csv(const std::string& path, const GeneratedCohort& cohort) {
    std::ofstream out(path);
    if (!out) throw IoError("synth", "cannot write file", path);
    write_csv_row(out, {"lesion_id", "archetype"});
    for (std::size_t i = 0; i < cohort.trajectories.size(); ++i)
        write_csv_row(out, {cohort.trajectories[i].lesion_id,
                            std::to_string(cohort.archetype_labels[i])});
}

void write_clinical_csv(const std::string& path, const ClinicalTable& table) {
    std::ofstream out(path);
    if (!out) throw IoError("synth", "cannot write file", path);
    write_csv_row(out, {"patient_id", "lesion_id", "name", "value"});
    for (const auto& [key, value] : table.entries)
        write_csv_row(out, {std::get<0>(key), std::get<1>(key), std::get<2>(key), value});
}

LabelVolume sphere_mask_volume(const GridInfo& grid, const std::vector<SphereSpec>& spheres) {
    LabelVolume vol;
    vol.grid = grid;
    vol.labels.assign(grid.voxel_count(), 0);
    const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const double cx = grid.origin_mm[0] + x * grid.spacing_mm[0];
                const double cy = grid.origin_mm[1] + y * grid.spacing_mm[1];
                const double cz = grid.origin_mm[2] + z * grid.spacing_mm[2];
                for (const auto& s : spheres) {
                    const double dx = cx - s.center_mm[0];
                    const double dy = cy - s.center_mm[1];
                    const double dz = cz - s.center_mm[2];
                    if (dx * dx + dy * dy + dz * dz <= s.radius_mm * s.radius_mm) {
                        vol.labels[static_cast<std::size_t>(x) +
                                   static_cast<std::size_t>(nx) *
                                       (y + static_cast<std::size_t>(ny) * z)] = s.label;
                        break;
                    }
                }
            }
        }
    }
    return vol;
}

}  // namespace bmt
