#include "bmt/ingest.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "bmt/csv.hpp"

namespace bmt {

namespace {
constexpr const char* kStage = "ingest";
constexpr const char* kFeatPrefix = "feat_";
}  // namespace

std::vector<LesionTrajectory> parse_trajectory_table(std::istream& in) {
    const CsvTable table = read_csv(in, kStage);
    const int pc = table.require_column("patient_id", kStage);
    const int lc = table.require_column("lesion_id", kStage);
    const int dc = table.require_column("day", kStage);
    const int vc = table.require_column("volume_mm3", kStage);

    std::vector<std::pair<int, std::string>> feat_cols;  // column index, stored name
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const std::string& name = table.header[c];
        if (name == "patient_id" || name == "lesion_id" || name == "day" ||
            name == "volume_mm3")
            continue;
        if (name.rfind(kFeatPrefix, 0) == 0) {
            feat_cols.emplace_back(static_cast<int>(c), name.substr(std::strlen(kFeatPrefix)));
        } else {
            throw ValidationError(kStage, "unknown column", name);
        }
    }

    // Group rows by (patient, lesion); keep first-appearance order for error
    // reporting, then sort the result for a canonical output order.
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        groups[{table.rows[r][pc], table.rows[r][lc]}].push_back(r);

    std::vector<LesionTrajectory> out;
    out.reserve(groups.size());
    for (auto& [key, row_indices] : groups) {
        LesionTrajectory traj;
        traj.patient_id = key.first;
        traj.lesion_id = key.second;
        for (std::size_t r : row_indices) {
            const auto& row = table.rows[r];
            const int line = table.line_numbers[r];
            ScanRecord rec;
            rec.day = parse_int_field(row[dc], kStage, line, "day");
            if (rec.day < 0)
                throw ValidationError(kStage, "negative day at line " + std::to_string(line),
                                      row[dc]);
            rec.volume_mm3 = parse_double_field(row[vc], kStage, line, "volume_mm3");
            if (rec.volume_mm3 < 0.0)
                throw ValidationError(kStage,
                                      "negative volume at line " + std::to_string(line),
                                      row[vc]);
            for (const auto& [col, name] : feat_cols)
                rec.features[name] = parse_double_field(row[col], kStage, line,
                                                        table.header[col]);
            traj.records.push_back(std::move(rec));
        }
        std::sort(traj.records.begin(), traj.records.end(),
                  [](const ScanRecord& a, const ScanRecord& b) { return a.day < b.day; });
        for (std::size_t i = 1; i < traj.records.size(); ++i) {
            if (traj.records[i].day == traj.records[i - 1].day) {
                // Report the later of the two offending source rows.
                int line = 0;
                int seen = 0;
                for (std::size_t r : row_indices) {
                    if (parse_int_field(table.rows[r][dc], kStage, table.line_numbers[r],
                                        "day") == traj.records[i].day) {
                        ++seen;
                        if (seen == 2) {
                            line = table.line_numbers[r];
                            break;
                        }
                    }
                }
                throw ValidationError(
                    kStage, "duplicate day " + std::to_string(traj.records[i].day) +
                                " at line " + std::to_string(line),
                    traj.patient_id + "/" + traj.lesion_id);
            }
        }
        if (traj.records.empty() || traj.records.front().day != 0)
            throw ValidationError(kStage, "missing day-0 record",
                                  traj.patient_id + "/" + traj.lesion_id);
        if (traj.records.front().volume_mm3 <= 0.0)
            throw ValidationError(kStage, "baseline volume must be positive",
                                  traj.patient_id + "/" + traj.lesion_id);
        out.push_back(std::move(traj));
    }
    return out;
}

std::vector<LesionTrajectory> read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(kStage, "cannot open file", path);
    return parse_trajectory_table(in);
}

void serialize_trajectory_table(std::ostream& out, const std::vector<LesionTrajectory>& trajs) {
    // Union of feature names across every record, in sorted order.
    std::set<std::string> feat_names;
    for (const auto& t : trajs)
        for (const auto& r : t.records)
            for (const auto& [name, _] : r.features) feat_names.insert(name);

    std::vector<std::string> header = {"patient_id", "lesion_id", "day", "volume_mm3"};
    for (const auto& name : feat_names) header.push_back(kFeatPrefix + name);
    write_csv_row(out, header);

    for (const auto& t : trajs) {
        for (const auto& r : t.records) {
            std::vector<std::string> row = {t.patient_id, t.lesion_id, std::to_string(r.day),
                                            format_double(r.volume_mm3)};
            for (const auto& name : feat_names) {
                auto it = r.features.find(name);
                row.push_back(it == r.features.end() ? "0" : format_double(it->second));
            }
            write_csv_row(out, row);
        }
    }
}

void write_trajectory_csv(const std::string& path, const std::vector<LesionTrajectory>& trajs) {
    std::ofstream out(path);
    if (!out) throw IoError(kStage, "cannot write file", path);
    serialize_trajectory_table(out, trajs);
}

const char* qc_kind_name(QcKind k) {
    switch (k) {
        case QcKind::CR_SWING: return "CR_SWING";
        case QcKind::GAP_TOO_LARGE: return "GAP_TOO_LARGE";
        case QcKind::SHORT_OBSERVATION: return "SHORT_OBSERVATION";
        case QcKind::SPARSE_FOLLOWUP: return "SPARSE_FOLLOWUP";
    }
    return "?";
}

CohortSplit apply_cohort_criteria(const std::vector<LesionTrajectory>& trajs,
                                  const CohortCriteria& criteria) {
    if (criteria.max_mean_interval_days <= 0.0 || criteria.min_observation_days <= 0.0 ||
        criteria.max_gap_days <= 0.0 ||
        criteria.min_observation_days <= criteria.max_mean_interval_days)
        throw ValidationError("qc", "invalid cohort criteria");
    CohortSplit split;
    for (const auto& traj : trajs) {
        std::optional<QcFlag> flag;
        long long max_gap = 0;
        double mean_interval = 0.0;
        const auto& recs = traj.records;
        if (recs.size() >= 2) {
            for (std::size_t i = 1; i < recs.size(); ++i)
                max_gap = std::max(max_gap, recs[i].day - recs[i - 1].day);
            mean_interval = static_cast<double>(recs.back().day - recs.front().day) /
                            static_cast<double>(recs.size() - 1);
        }
        const long long span = traj.span_days();

        if (static_cast<double>(max_gap) >= criteria.max_gap_days) {
            flag = QcFlag{traj.patient_id, traj.lesion_id, QcKind::GAP_TOO_LARGE,
                          "max gap " + std::to_string(max_gap) + " d"};
        } else if (recs.size() < 2 || mean_interval > criteria.max_mean_interval_days) {
            const std::string detail =
                recs.size() < 2 ? "fewer than 2 scans"
                                : "mean interval " + format_double(mean_interval) + " d";
            flag = QcFlag{traj.patient_id, traj.lesion_id, QcKind::SPARSE_FOLLOWUP, detail};
        } else if (static_cast<double>(span) < criteria.min_observation_days) {
            flag = QcFlag{traj.patient_id, traj.lesion_id, QcKind::SHORT_OBSERVATION,
                          "span " + std::to_string(span) + " d"};
        }

        if (flag.has_value()) split.flagged.push_back(std::move(*flag));
        else split.kept.push_back(traj);
    }
    return split;
}

std::optional<QcFlag> detect_cr_swings(const LesionTrajectory& traj, double min_rebound_fraction,
                                       int min_rebound_count) {
    const double threshold = min_rebound_fraction * traj.baseline_volume();
    const auto& recs = traj.records;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (recs[i].volume_mm3 != 0.0) continue;
        int run = 0;
        for (std::size_t j = i + 1; j < recs.size() && recs[j].volume_mm3 > threshold; ++j) ++run;
        if (run >= min_rebound_count) {
            return QcFlag{traj.patient_id, traj.lesion_id, QcKind::CR_SWING,
                          "zero at day " + std::to_string(recs[i].day) + " followed by " +
                              std::to_string(run) + " rebounds"};
        }
    }
    return std::nullopt;
}

void write_flag_report(const std::string& path, const std::vector<QcFlag>& flags) {
    std::ofstream out(path);
    if (!out) throw IoError(kStage, "cannot write file", path);
    write_csv_row(out, {"patient_id", "lesion_id", "kind", "detail"});
    for (const auto& f : flags)
        write_csv_row(out, {f.patient_id, f.lesion_id, qc_kind_name(f.kind), f.detail});
}

std::optional<std::string> ClinicalTable::lookup(const std::string& patient_id,
                                                 const std::string& lesion_id,
                                                 const std::string& name) const {
    auto it = entries.find({patient_id, lesion_id, name});
    if (it != entries.end()) return it->second;
    it = entries.find({patient_id, "", name});
    if (it != entries.end()) return it->second;
    return std::nullopt;
}

std::vector<std::string> ClinicalTable::variable_names() const {
    std::set<std::string> names;
    for (const auto& [key, _] : entries) names.insert(std::get<2>(key));
    return {names.begin(), names.end()};
}

ClinicalTable parse_clinical_table(std::istream& in) {
    const CsvTable table = read_csv(in, "clinical");
    const int pc = table.require_column("patient_id", "clinical");
    const int lc = table.require_column("lesion_id", "clinical");
    const int nc = table.require_column("name", "clinical");
    const int vc = table.require_column("value", "clinical");
    ClinicalTable out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        auto key = std::make_tuple(row[pc], row[lc], row[nc]);
        auto it = out.entries.find(key);
        if (it != out.entries.end()) {
            if (it->second != row[vc])
                throw ValidationError("clinical", "conflicting duplicate entry",
                                      row[pc] + "/" + row[lc] + "/" + row[nc]);
            continue;
        }
        out.entries.emplace(std::move(key), row[vc]);
    }
    return out;
}

ClinicalTable read_clinical_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("clinical", "cannot open file", path);
    return parse_clinical_table(in);
}

}  // namespace bmt
