#include "bmt/pipeline.hpp"

#include "bmt/csv.hpp"

namespace bmt {

PreparedCohort prepare_cohort(const std::vector<LesionTrajectory>& trajectories,
                              const PipelineOptions& options) {
    PreparedCohort out;
    if (options.apply_qc) {
        CohortSplit split = apply_cohort_criteria(trajectories, options.cohort_criteria);
        std::vector<LesionTrajectory> kept;
        for (auto& traj : split.kept) {
            auto swing = detect_cr_swings(traj, options.cr_swing_rebound_fraction,
                                          options.cr_swing_rebound_count);
            if (swing.has_value()) split.flagged.push_back(std::move(*swing));
            else kept.push_back(std::move(traj));
        }
        out.flags = std::move(split.flagged);
        out.kept = options.include_flagged ? trajectories : std::move(kept);
    } else {
        out.kept = trajectories;
    }

    for (const auto& traj : out.kept) {
        ResampledTrajectory res = resample(traj, options.method);
        if (options.impute) res = impute_noisy_points(res);
        out.resampled.push_back(std::move(res));
    }

    for (const auto& res : out.resampled) {
        const auto classified = classify_trajectory(res, options.response_criteria);
        std::vector<ResponseCategory> categories;
        categories.reserve(classified.size());
        for (const auto& point : classified) categories.push_back(point.category);
        out.t6_categories.push_back(categories.back());
        out.classified.push_back(std::move(categories));
    }
    return out;
}

FeatureMatrix read_feature_csv(const std::string& path) {
    const CsvTable table = read_csv_file(path, "features");
    const int pc = table.require_column("patient_id", "features");
    const int lc = table.require_column("lesion_id", "features");

    FeatureMatrix m;
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        m.rows.emplace_back(table.rows[r][pc], table.rows[r][lc]);

    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const std::string& name = table.header[c];
        if (name == "patient_id" || name == "lesion_id") continue;
        FeatureColumn col;
        col.name = name;
        const auto at = name.rfind("@t");
        if (at != std::string::npos && at + 2 < name.size()) {
            col.origin = ColumnOrigin::per_time_point;
            col.time_index = std::stoi(name.substr(at + 2));
        } else {
            col.origin = ColumnOrigin::clinical;
            col.time_index = -1;
            col.one_hot = name.find('=') != std::string::npos;
        }
        for (std::size_t r = 0; r < table.rows.size(); ++r)
            col.values.push_back(parse_double_field(table.rows[r][c], "features",
                                                    table.line_numbers[r], name));
        m.columns.push_back(std::move(col));
    }
    return m;
}

}  // namespace bmt
