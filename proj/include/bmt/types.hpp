#pragma once

#include <map>
#include <string>
#include <vector>

#include "bmt/errors.hpp"

namespace bmt {

// One scan of one lesion. day counts from the treatment day (day 0).
struct ScanRecord {
    long long day = 0;
    double volume_mm3 = 0.0;
    std::map<std::string, double> features;  // per-time-point features by name
    bool observed = true;                    // false when the value was imputed
};

// A lesion's dated volume/feature series anchored at treatment day 0.
// Invariants: records sorted strictly ascending by day, first record at
// day 0, baseline volume > 0, lesion_id unique within patient.
struct LesionTrajectory {
    std::string patient_id;
    std::string lesion_id;
    std::vector<ScanRecord> records;
    std::map<std::string, double> clinical;  // static covariates (rarely used; see featspace)

    double baseline_volume() const { return records.empty() ? 0.0 : records.front().volume_mm3; }
    long long span_days() const {
        return records.empty() ? 0 : records.back().day - records.front().day;
    }
};

// Volumetric response categories at lesion level.
enum class ResponseCategory : int { CR = 0, PR = 1, SD = 2, PD = 3 };

inline const char* category_name(ResponseCategory c) {
    switch (c) {
        case ResponseCategory::CR: return "CR";
        case ResponseCategory::PR: return "PR";
        case ResponseCategory::SD: return "SD";
        case ResponseCategory::PD: return "PD";
    }
    return "?";
}

inline ResponseCategory parse_category(const std::string& s) {
    if (s == "CR") return ResponseCategory::CR;
    if (s == "PR") return ResponseCategory::PR;
    if (s == "SD") return ResponseCategory::SD;
    if (s == "PD") return ResponseCategory::PD;
    throw ValidationError("classify", "unknown response category", s);
}

// Volumetric thresholds. 0.343 = 0.7^3 and 1.728 = 1.2^3 translate the
// diameter-based criteria to volumes; CR cutoff defaults to an empty mask with
// room for voxel-noise tolerance.
struct ResponseCriteria {
    double pr_fraction_of_baseline = 0.343;
    double pd_fraction_of_nadir = 1.728;
    double cr_volume_mm3 = 0.0;
};

}  // namespace bmt
