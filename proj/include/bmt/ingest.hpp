#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bmt/types.hpp"

namespace bmt {

// ---- trajectory table ----
// CSV columns: patient_id,lesion_id,day,volume_mm3[,feat_*...]. Feature
// column names are stored without the "feat_" prefix and restored on write.

std::vector<LesionTrajectory> parse_trajectory_table(std::istream& in);
std::vector<LesionTrajectory> read_trajectory_csv(const std::string& path);
void serialize_trajectory_table(std::ostream& out, const std::vector<LesionTrajectory>& trajs);
void write_trajectory_csv(const std::string& path, const std::vector<LesionTrajectory>& trajs);

// ---- cohort inclusion ----

struct CohortCriteria {
    double max_mean_interval_days = 90.0;
    double min_observation_days = 300.0;
    double max_gap_days = 120.0;
};

enum class QcKind { CR_SWING, GAP_TOO_LARGE, SHORT_OBSERVATION, SPARSE_FOLLOWUP };

const char* qc_kind_name(QcKind k);

struct QcFlag {
    std::string patient_id;
    std::string lesion_id;
    QcKind kind = QcKind::CR_SWING;
    std::string detail;
};

struct CohortSplit {
    std::vector<LesionTrajectory> kept;
    std::vector<QcFlag> flagged;
};

// Keeps trajectories meeting the schedule criteria; others get one flag for
// the first failing criterion, checked in pipeline order: gap, then follow-up
// cadence, then observation span.
CohortSplit apply_cohort_criteria(const std::vector<LesionTrajectory>& trajs,
                                  const CohortCriteria& criteria = {});

// Flags a zero-volume observation followed by at least min_rebound_count
// consecutive observations above min_rebound_fraction of baseline. Single
// rebound points are left for imputation downstream.
std::optional<QcFlag> detect_cr_swings(const LesionTrajectory& traj,
                                       double min_rebound_fraction = 0.10,
                                       int min_rebound_count = 2);

void write_flag_report(const std::string& path, const std::vector<QcFlag>& flags);

// ---- clinical table ----
// Long-format CSV: patient_id,lesion_id,name,value with an empty lesion_id
// for patient-level values. Lesion-level entries take precedence.

struct ClinicalTable {
    // key: (patient_id, lesion_id or "", name) -> raw value
    std::map<std::tuple<std::string, std::string, std::string>, std::string> entries;

    std::optional<std::string> lookup(const std::string& patient_id, const std::string& lesion_id,
                                      const std::string& name) const;
    std::vector<std::string> variable_names() const;
};

ClinicalTable parse_clinical_table(std::istream& in);
ClinicalTable read_clinical_csv(const std::string& path);

}  // namespace bmt
