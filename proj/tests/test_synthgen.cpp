#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <sstream>

#include "bmt/ingest.hpp"
#include "bmt/resample.hpp"
#include "bmt/response.hpp"
#include "bmt/synthgen.hpp"

using namespace bmt;

namespace {

SynthConfig noise_free(std::size_t n, uint64_t seed, int only_archetype = -1) {
    SynthConfig cfg;
    cfg.n_lesions = n;
    cfg.seed = seed;
    cfg.noise_scale = 0.0;
    if (only_archetype >= 0) {
        for (auto& a : cfg.archetypes)
            a.mixing_weight = a.id == only_archetype ? 1.0 : 0.0;
    }
    return cfg;
}

}  // namespace

TEST_CASE("archetype 0 reaches complete response by one year") {
    const auto cohort = generate(noise_free(20, 1, 0));
    const auto targets = label_targets(cohort);
    for (const auto c : targets.t6_categories) CHECK(c == ResponseCategory::CR);
    for (int label : targets.cr_labels) CHECK(label == 1);
}

TEST_CASE("archetype 3 is progressive at every classified point") {
    const auto cohort = generate(noise_free(20, 2, 3));
    for (const auto& traj : cohort.trajectories) {
        for (const auto& point : classify_trajectory(traj))
            CHECK(point.category == ResponseCategory::PD);
    }
}

TEST_CASE("generation is deterministic per seed") {
    SynthConfig cfg;
    cfg.n_lesions = 60;
    cfg.seed = 42;
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    std::ostringstream sa, sb;
    serialize_trajectory_table(sa, a.trajectories);
    serialize_trajectory_table(sb, b.trajectories);
    CHECK(sa.str() == sb.str());
    CHECK(a.archetype_labels == b.archetype_labels);

    SynthConfig other = cfg;
    other.seed = 43;
    std::ostringstream sc;
    serialize_trajectory_table(sc, generate(other).trajectories);
    CHECK(sa.str() != sc.str());
}

TEST_CASE("generated cohorts satisfy trajectory invariants and pass QC") {
    SynthConfig cfg;
    cfg.n_lesions = 300;
    cfg.seed = 9;
    const auto cohort = generate(cfg);
    CHECK(cohort.trajectories.size() == 300);
    for (const auto& t : cohort.trajectories) {
        REQUIRE_FALSE(t.records.empty());
        CHECK(t.records.front().day == 0);
        CHECK(t.records.front().volume_mm3 > 0.0);
        for (std::size_t r = 1; r < t.records.size(); ++r) {
            CHECK(t.records[r].day > t.records[r - 1].day);
            CHECK(t.records[r].volume_mm3 >= 0.0);
        }
        CHECK(t.span_days() >= 360);
    }
    const auto split = apply_cohort_criteria(cohort.trajectories);
    CHECK(split.flagged.empty());
    CHECK(split.kept.size() == cohort.trajectories.size());
}

TEST_CASE("noise-free mixes classify by archetype mass") {
    SynthConfig cfg = noise_free(1000, 11);
    const double weights[5] = {0.40, 0.10, 0.20, 0.15, 0.15};
    for (auto& a : cfg.archetypes) a.mixing_weight = weights[a.id];
    const auto cohort = generate(cfg);
    const auto targets = label_targets(cohort);
    double cr = 0.0;
    for (int label : targets.cr_labels) cr += label;
    cr /= static_cast<double>(targets.cr_labels.size());
    // Only archetype 0 ends in CR without noise.
    CHECK(cr == doctest::Approx(0.40).epsilon(0.125));

    std::map<int, int> archetype_counts;
    for (int a : cohort.archetype_labels) archetype_counts[a] += 1;
    const double a0 = static_cast<double>(archetype_counts[0]) /
                      static_cast<double>(cohort.archetype_labels.size());
    CHECK(cr == doctest::Approx(a0).epsilon(1e-9));  // exact: CR iff archetype 0
}

TEST_CASE("most one-year complete responders are already CR at the first follow-up") {
    SynthConfig cfg;
    cfg.n_lesions = 500;
    cfg.seed = 42;
    const auto cohort = generate(cfg);
    long long cr_at_t6 = 0, cr_by_t1 = 0;
    for (const auto& traj : cohort.trajectories) {
        const auto res = resample_nn(traj);
        const auto classified = classify_trajectory(res);
        if (classified.back().category != ResponseCategory::CR) continue;
        ++cr_at_t6;
        if (classified.front().category == ResponseCategory::CR) ++cr_by_t1;
    }
    REQUIRE(cr_at_t6 > 0);
    CHECK(cr_by_t1 * 2 > cr_at_t6);  // majority entered CR by t1
}

TEST_CASE("lesions link to patients and clinical covariates") {
    SynthConfig cfg;
    cfg.n_lesions = 100;
    cfg.seed = 12;
    const auto cohort = generate(cfg);
    std::map<std::string, int> per_patient;
    for (const auto& t : cohort.trajectories) per_patient[t.patient_id] += 1;
    CHECK(per_patient.size() > 5);   // several patients
    CHECK(per_patient.size() < 100); // with multiple lesions each on average
    for (const auto& [patient, count] : per_patient) {
        CHECK(cohort.clinical.lookup(patient, "", "age").has_value());
        CHECK(cohort.clinical.lookup(patient, "", "sex").has_value());
        CHECK(cohort.clinical.lookup(patient, "", "primary").has_value());
        CHECK(cohort.clinical.lookup(patient, "", "lesion_count") ==
              std::to_string(count));
    }
    for (const auto& t : cohort.trajectories)
        CHECK(cohort.clinical.lookup(t.patient_id, t.lesion_id, "location").has_value());
}

TEST_CASE("schedules follow the configured cadence") {
    SynthConfig cfg;
    cfg.n_lesions = 200;
    cfg.seed = 13;
    const auto cohort = generate(cfg);
    for (const auto& t : cohort.trajectories) {
        double mean = 0.0;
        for (std::size_t r = 1; r < t.records.size(); ++r) {
            const long long gap = t.records[r].day - t.records[r - 1].day;
            CHECK(gap >= 30);
            CHECK(gap <= 119);
            mean += static_cast<double>(gap);
        }
        mean /= static_cast<double>(t.records.size() - 1);
        CHECK(mean <= 90.0);
    }
}

TEST_CASE("sphere masks rasterize voxel centers") {
    GridInfo grid{{20, 20, 20}, {1, 1, 1}, {0, 0, 0}};
    const auto vol = sphere_mask_volume(
        grid, {{{5, 5, 5}, 3.0, 1}, {{14, 14, 14}, 2.0, 2}});
    long long count1 = 0, count2 = 0;
    for (auto v : vol.labels) {
        if (v == 1) ++count1;
        if (v == 2) ++count2;
    }
    // Voxelized ball volumes approximate (4/3) pi r^3.
    CHECK(static_cast<double>(count1) == doctest::Approx(4.0 / 3.0 * M_PI * 27.0).epsilon(0.2));
    CHECK(static_cast<double>(count2) == doctest::Approx(4.0 / 3.0 * M_PI * 8.0).epsilon(0.25));
    CHECK(count1 > count2);
}

TEST_CASE("tiny cohorts are rejected") {
    SynthConfig cfg;
    cfg.n_lesions = 5;
    CHECK_THROWS_AS(generate(cfg), ValidationError);
}
