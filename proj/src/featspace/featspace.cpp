#include "bmt/featspace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"

#include "bmt/csv.hpp"
#include "bmt/simd.hpp"

namespace bmt {

ResampledTrajectory impute_noisy_points(const ResampledTrajectory& traj) {
    ResampledTrajectory out = traj;
    const auto& v = traj.volumes;  // detection runs on the original values
    for (int k = 1; k + 1 < ResampledTrajectory::kPoints; ++k) {
        if (v[k] != 0.0 || v[k - 1] <= 0.0 || v[k + 1] <= 0.0) continue;
        const double span = static_cast<double>(ResampledTrajectory::grid_days[k + 1] -
                                                ResampledTrajectory::grid_days[k - 1]);
        const double w_left = static_cast<double>(ResampledTrajectory::grid_days[k + 1] -
                                                  ResampledTrajectory::grid_days[k]) / span;
        const double w_right = 1.0 - w_left;
        out.volumes[k] = w_left * v[k - 1] + w_right * v[k + 1];
        out.observed[k] = false;
        out.source_index[k].reset();
        // Impute every numeric per-point feature present on both neighbors.
        std::map<std::string, double> imputed;
        for (const auto& [name, left] : traj.point_features[k - 1]) {
            auto it = traj.point_features[k + 1].find(name);
            if (it != traj.point_features[k + 1].end())
                imputed[name] = w_left * left + w_right * it->second;
        }
        out.point_features[k] = std::move(imputed);
    }
    out.normalized = normalize_volumes(out.volumes);
    return out;
}

std::map<std::string, double> shape_features(const LesionComponent& comp, const GridInfo& grid) {
    std::map<std::string, double> out;
    if (comp.voxels.empty()) {
        for (const char* name :
             {"volume_mm3", "voxel_count", "surface_area_mm2", "sphericity",
              "max_axis_extent_mm", "centroid_x_mm", "centroid_y_mm", "centroid_z_mm"})
            out[name] = 0.0;
        return out;
    }

    const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
    const auto& sp = grid.spacing_mm;
    std::set<uint32_t> voxel_set(comp.voxels.begin(), comp.voxels.end());

    // Face counting: every voxel face not shared with another component voxel
    // contributes its area.
    const double face_area[3] = {sp[1] * sp[2], sp[0] * sp[2], sp[0] * sp[1]};
    double area = 0.0;
    int min_idx[3] = {nx, ny, nz}, max_idx[3] = {-1, -1, -1};
    for (uint32_t v : comp.voxels) {
        const int x = static_cast<int>(v % nx);
        const int y = static_cast<int>((v / nx) % ny);
        const int z = static_cast<int>(v / (static_cast<std::size_t>(nx) * ny));
        const int coords[3] = {x, y, z};
        for (int axis = 0; axis < 3; ++axis) {
            min_idx[axis] = std::min(min_idx[axis], coords[axis]);
            max_idx[axis] = std::max(max_idx[axis], coords[axis]);
        }
        const int steps[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        for (int axis = 0; axis < 3; ++axis) {
            for (int dir = -1; dir <= 1; dir += 2) {
                const int X = x + dir * steps[axis][0];
                const int Y = y + dir * steps[axis][1];
                const int Z = z + dir * steps[axis][2];
                bool neighbor_inside = false;
                if (X >= 0 && X < nx && Y >= 0 && Y < ny && Z >= 0 && Z < nz) {
                    const uint32_t nidx = static_cast<uint32_t>(
                        X + static_cast<std::size_t>(nx) * (Y + static_cast<std::size_t>(ny) * Z));
                    neighbor_inside = voxel_set.count(nidx) > 0;
                }
                if (!neighbor_inside) area += face_area[axis];
            }
        }
    }

    const double volume = comp.volume_mm3;
    const double sphericity =
        std::pow(M_PI, 1.0 / 3.0) * std::pow(6.0 * volume, 2.0 / 3.0) / area;
    double max_extent = 0.0;
    for (int axis = 0; axis < 3; ++axis)
        max_extent = std::max(max_extent,
                              (max_idx[axis] - min_idx[axis] + 1) * sp[axis]);

    out["volume_mm3"] = volume;
    out["voxel_count"] = static_cast<double>(comp.voxel_count);
    out["surface_area_mm2"] = area;
    out["sphericity"] = sphericity;
    out["max_axis_extent_mm"] = max_extent;
    out["centroid_x_mm"] = comp.centroid_mm[0];
    out["centroid_y_mm"] = comp.centroid_mm[1];
    out["centroid_z_mm"] = comp.centroid_mm[2];
    return out;
}

namespace {

bool parses_as_number(const std::string& s, double* value) {
    const char* begin = s.c_str();
    const char* end = begin + s.size();
    double v = 0.0;
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end) return false;
    if (value != nullptr) *value = v;
    return true;
}

}  // namespace

ClinicalBlock encode_clinical(const ClinicalTable& table,
                              const std::vector<std::pair<std::string, std::string>>& lesions) {
    // Variable typing over the full table: numeric iff all values parse.
    std::map<std::string, bool> numeric;
    std::map<std::string, std::set<std::string>> categories;
    for (const auto& [key, value] : table.entries) {
        const std::string& name = std::get<2>(key);
        auto it = numeric.try_emplace(name, true).first;
        if (!parses_as_number(value, nullptr)) it->second = false;
    }
    for (const auto& [key, value] : table.entries) {
        const std::string& name = std::get<2>(key);
        if (!numeric[name]) categories[name].insert(value);
    }

    ClinicalBlock block;
    for (const auto& [name, is_numeric] : numeric) {
        if (is_numeric) {
            block.column_names.push_back(name);
        } else {
            for (const auto& cat : categories[name])
                block.column_names.push_back(name + "=" + cat);
        }
    }

    for (const auto& [patient_id, lesion_id] : lesions) {
        std::vector<double> row;
        row.reserve(block.column_names.size());
        for (const auto& [name, is_numeric] : numeric) {
            auto raw = table.lookup(patient_id, lesion_id, name);
            if (is_numeric) {
                double v = 0.0;  // missing -> 0
                if (raw.has_value()) parses_as_number(*raw, &v);
                row.push_back(v);
            } else {
                for (const auto& cat : categories[name])
                    row.push_back(raw.has_value() && *raw == cat ? 1.0 : 0.0);
            }
        }
        block.rows.push_back(std::move(row));
    }
    return block;
}

int FeatureMatrix::column_index(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (columns[c].name == name) return static_cast<int>(c);
    return -1;
}

FeatureMatrix assemble(const std::vector<ResampledTrajectory>& trajs,
                       const ClinicalTable* clinical, const AssembleOptions& options) {
    if (options.horizon < 0 || options.horizon > 5)
        throw ValidationError("features", "horizon must be in [0,5]",
                              std::to_string(options.horizon));

    FeatureMatrix m;
    for (const auto& t : trajs) m.rows.emplace_back(t.patient_id, t.lesion_id);

    // Per-point feature names: union over lesions and points, filtered by kind.
    std::set<std::string> point_names;
    if (options.include_shape || options.include_injected) {
        for (const auto& t : trajs)
            for (int k = 0; k <= options.horizon; ++k)
                for (const auto& [name, _] : t.point_features[k]) {
                    const bool is_shape = name.rfind("shape_", 0) == 0;
                    if ((is_shape && options.include_shape) ||
                        (!is_shape && options.include_injected))
                        point_names.insert(name);
                }
    }

    // Missing injected features are an input error, not a silent zero.
    if (!point_names.empty()) {
        std::set<std::string> missing;
        for (const auto& t : trajs) {
            for (int k = 0; k <= options.horizon; ++k) {
                for (const auto& name : point_names) {
                    if (t.point_features[k].count(name) == 0)
                        missing.insert(t.patient_id + "/" + t.lesion_id);
                }
            }
        }
        if (!missing.empty()) {
            std::string list;
            for (const auto& id : missing) {
                if (!list.empty()) list += ", ";
                list += id;
            }
            throw ValidationError("features", "per-point features missing for lesions", list);
        }
    }

    for (int k = 0; k <= options.horizon; ++k) {
        const std::string suffix = "@t" + std::to_string(k);
        if (options.include_volume) {
            FeatureColumn col;
            col.name = "volume_mm3" + suffix;
            col.origin = ColumnOrigin::per_time_point;
            col.time_index = k;
            for (const auto& t : trajs) col.values.push_back(t.volumes[k]);
            m.columns.push_back(std::move(col));
        }
        for (const auto& name : point_names) {
            FeatureColumn col;
            col.name = name + suffix;
            col.origin = ColumnOrigin::per_time_point;
            col.time_index = k;
            for (const auto& t : trajs) col.values.push_back(t.point_features[k].at(name));
            m.columns.push_back(std::move(col));
        }
    }

    if (options.include_clinical && clinical != nullptr) {
        const ClinicalBlock block = encode_clinical(*clinical, m.rows);
        for (std::size_t c = 0; c < block.column_names.size(); ++c) {
            FeatureColumn col;
            col.name = block.column_names[c];
            col.origin = ColumnOrigin::clinical;
            col.time_index = -1;
            col.one_hot = block.column_names[c].find('=') != std::string::npos;
            for (const auto& row : block.rows) col.values.push_back(row[c]);
            m.columns.push_back(std::move(col));
        }
    }

    for (const auto& col : m.columns)
        for (double v : col.values)
            if (!std::isfinite(v))
                throw ValidationError("features", "non-finite value in column", col.name);
    return m;
}

void write_feature_csv(const std::string& path, const FeatureMatrix& matrix) {
    std::ofstream out(path);
    if (!out) throw IoError("features", "cannot write file", path);
    std::vector<std::string> header = {"patient_id", "lesion_id"};
    for (const auto& col : matrix.columns) header.push_back(col.name);
    write_csv_row(out, header);
    for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
        std::vector<std::string> row = {matrix.rows[r].first, matrix.rows[r].second};
        for (const auto& col : matrix.columns) row.push_back(format_double(col.values[r]));
        write_csv_row(out, row);
    }
}

StandardizationParams standardize_fit(const FeatureMatrix& matrix,
                                      const std::vector<std::size_t>& train_rows,
                                      const std::function<void(std::size_t)>& row_access_hook) {
    if (train_rows.empty()) throw ValidationError("features", "empty training rows");
    if (row_access_hook) {
        for (std::size_t r : train_rows) row_access_hook(r);
    }
    StandardizationParams p;
    const double n = static_cast<double>(train_rows.size());
    for (const auto& col : matrix.columns) {
        double sum = 0.0;
        for (std::size_t r : train_rows) sum += col.values[r];
        const double mean = sum / n;
        double ssd = 0.0;
        for (std::size_t r : train_rows) {
            const double d = col.values[r] - mean;
            ssd += d * d;
        }
        const double sigma = std::sqrt(ssd / n);
        p.mean.push_back(mean);
        p.sigma.push_back(sigma);
        p.zero_sigma.push_back(sigma == 0.0);
    }
    return p;
}

FeatureMatrix standardize_apply(const StandardizationParams& params,
                                const FeatureMatrix& matrix) {
    if (params.mean.size() != matrix.n_cols())
        throw ValidationError("features", "standardization params do not match matrix");
    FeatureMatrix out = matrix;
    for (std::size_t c = 0; c < out.columns.size(); ++c) {
        auto& values = out.columns[c].values;
        if (params.zero_sigma[c]) {
            std::fill(values.begin(), values.end(), 0.0);
        } else {
            simd::zscore(matrix.columns[c].values.data(), params.mean[c],
                         1.0 / params.sigma[c], values.data(), values.size());
        }
    }
    return out;
}

void write_standardization_json(const std::string& path, const StandardizationParams& params,
                                const FeatureMatrix& matrix) {
    nlohmann::json j;
    for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
        j[matrix.columns[c].name] = {{"mean", params.mean[c]},
                                     {"sigma", params.sigma[c]},
                                     {"zero_sigma", static_cast<bool>(params.zero_sigma[c])}};
    }
    std::ofstream out(path);
    if (!out) throw IoError("features", "cannot write file", path);
    out << j.dump(2) << '\n';
}

}  // namespace bmt
