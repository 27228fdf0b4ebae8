#include "bmt/resample.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "bmt/csv.hpp"

namespace bmt {

namespace {

void require_nonempty(const LesionTrajectory& traj) {
    if (traj.records.empty())
        throw ValidationError("resample", "empty trajectory",
                              traj.patient_id + "/" + traj.lesion_id);
}

ResampledTrajectory make_base(const LesionTrajectory& traj) {
    ResampledTrajectory out;
    out.patient_id = traj.patient_id;
    out.lesion_id = traj.lesion_id;
    out.observed.fill(true);
    return out;
}

void fill_normalized(ResampledTrajectory& r) {
    r.normalized = normalize_volumes(r.volumes);
}

// Tridiagonal solve for cubic-spline second derivatives with clamped
// (zero-slope) ends.
std::vector<double> spline_second_derivatives(const std::vector<double>& x,
                                              const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> m(n, 0.0);     // second derivatives
    std::vector<double> diag(n), off(n), rhs(n), scratch(n);

    // Clamped end conditions: y'(x0) = y'(xn) = 0.
    diag[0] = 2.0 * (x[1] - x[0]);
    off[0] = x[1] - x[0];
    rhs[0] = 6.0 * ((y[1] - y[0]) / (x[1] - x[0]) - 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x[i] - x[i - 1];
        const double h1 = x[i + 1] - x[i];
        diag[i] = 2.0 * (h0 + h1);
        off[i] = h1;
        rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    const double hn = x[n - 1] - x[n - 2];
    diag[n - 1] = 2.0 * hn;
    rhs[n - 1] = 6.0 * (0.0 - (y[n - 1] - y[n - 2]) / hn);

    // Thomas algorithm; sub-diagonal equals the previous off-diagonal.
    scratch[0] = off[0] / diag[0];
    rhs[0] /= diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        const double sub = (i == n - 1) ? hn : x[i] - x[i - 1];
        const double denom = diag[i] - sub * scratch[i - 1];
        scratch[i] = off[i] / denom;
        rhs[i] = (rhs[i] - sub * rhs[i - 1]) / denom;
    }
    m[n - 1] = rhs[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m[i] = rhs[i] - scratch[i] * m[i + 1];
    return m;
}

double spline_eval(const std::vector<double>& x, const std::vector<double>& y,
                   const std::vector<double>& m, double t) {
    if (t <= x.front()) return y.front();
    if (t >= x.back()) return y.back();
    std::size_t hi = 1;
    while (x[hi] < t) ++hi;
    const std::size_t lo = hi - 1;
    const double h = x[hi] - x[lo];
    const double a = (x[hi] - t) / h;
    const double b = (t - x[lo]) / h;
    return a * y[lo] + b * y[hi] +
           ((a * a * a - a) * m[lo] + (b * b * b - b) * m[hi]) * (h * h) / 6.0;
}

}  // namespace

ResampleMethod parse_resample_method(const std::string& s) {
    if (s == "nn" || s == "nearest") return ResampleMethod::nearest;
    if (s == "linear") return ResampleMethod::linear;
    if (s == "bspline") return ResampleMethod::bspline;
    throw ValidationError("resample", "unknown method", s);
}

const char* resample_method_name(ResampleMethod m) {
    switch (m) {
        case ResampleMethod::nearest: return "nn";
        case ResampleMethod::linear: return "linear";
        case ResampleMethod::bspline: return "bspline";
    }
    return "?";
}

ResampledTrajectory resample_nn(const LesionTrajectory& traj) {
    require_nonempty(traj);
    ResampledTrajectory out = make_base(traj);
    for (int g = 0; g < ResampledTrajectory::kPoints; ++g) {
        const long long day = ResampledTrajectory::grid_days[g];
        int best = 0;
        long long best_dist = std::llabs(traj.records[0].day - day);
        for (int i = 1; i < static_cast<int>(traj.records.size()); ++i) {
            const long long dist = std::llabs(traj.records[i].day - day);
            if (dist < best_dist) {  // ties keep the earlier record
                best = i;
                best_dist = dist;
            }
        }
        out.volumes[g] = traj.records[best].volume_mm3;
        out.source_index[g] = best;
        out.point_features[g] = traj.records[best].features;
    }
    fill_normalized(out);
    return out;
}

ResampledTrajectory resample_linear(const LesionTrajectory& traj) {
    require_nonempty(traj);
    ResampledTrajectory out = make_base(traj);
    const auto& recs = traj.records;
    for (int g = 0; g < ResampledTrajectory::kPoints; ++g) {
        const double day = static_cast<double>(ResampledTrajectory::grid_days[g]);
        double value;
        if (day <= static_cast<double>(recs.front().day)) {
            value = recs.front().volume_mm3;
        } else if (day >= static_cast<double>(recs.back().day)) {
            value = recs.back().volume_mm3;
        } else {
            std::size_t hi = 1;
            while (static_cast<double>(recs[hi].day) < day) ++hi;
            const auto& a = recs[hi - 1];
            const auto& b = recs[hi];
            const double t = (day - static_cast<double>(a.day)) /
                             static_cast<double>(b.day - a.day);
            value = (1.0 - t) * a.volume_mm3 + t * b.volume_mm3;
        }
        out.volumes[g] = value;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (recs[i].day == ResampledTrajectory::grid_days[g]) {
                out.source_index[g] = static_cast<int>(i);
                out.volumes[g] = recs[i].volume_mm3;
                out.point_features[g] = recs[i].features;
                break;
            }
        }
    }
    fill_normalized(out);
    return out;
}

ResampledTrajectory resample_bspline(const LesionTrajectory& traj, bool* fell_back) {
    require_nonempty(traj);
    if (fell_back != nullptr) *fell_back = false;
    if (traj.records.size() < 4) {
        if (fell_back != nullptr) *fell_back = true;
        return resample_linear(traj);
    }
    ResampledTrajectory out = make_base(traj);
    std::vector<double> x, y;
    x.reserve(traj.records.size());
    y.reserve(traj.records.size());
    for (const auto& r : traj.records) {
        x.push_back(static_cast<double>(r.day));
        y.push_back(r.volume_mm3);
    }
    const auto m = spline_second_derivatives(x, y);
    for (int g = 0; g < ResampledTrajectory::kPoints; ++g) {
        const double day = static_cast<double>(ResampledTrajectory::grid_days[g]);
        out.volumes[g] = std::max(0.0, spline_eval(x, y, m, day));
        for (std::size_t i = 0; i < traj.records.size(); ++i) {
            if (traj.records[i].day == ResampledTrajectory::grid_days[g]) {
                out.source_index[g] = static_cast<int>(i);
                out.volumes[g] = traj.records[i].volume_mm3;
                out.point_features[g] = traj.records[i].features;
                break;
            }
        }
    }
    fill_normalized(out);
    return out;
}

ResampledTrajectory resample(const LesionTrajectory& traj, ResampleMethod method) {
    switch (method) {
        case ResampleMethod::nearest: return resample_nn(traj);
        case ResampleMethod::linear: return resample_linear(traj);
        case ResampleMethod::bspline: return resample_bspline(traj);
    }
    throw ValidationError("resample", "unknown method");
}

std::array<double, ResampledTrajectory::kPoints> normalize_volumes(
    const std::array<double, ResampledTrajectory::kPoints>& volumes) {
    if (volumes[0] <= 0.0)
        throw ValidationError("resample", "zero baseline: cannot normalize");
    std::array<double, ResampledTrajectory::kPoints> out{};
    out[0] = 1.0;
    for (int i = 1; i < ResampledTrajectory::kPoints; ++i) out[i] = volumes[i] / volumes[0];
    return out;
}

void write_resampled_csv(const std::string& path, const std::vector<ResampledTrajectory>& trajs,
                         bool normalized) {
    std::ofstream out(path);
    if (!out) throw IoError("resample", "cannot write file", path);
    std::vector<std::string> header = {"patient_id", "lesion_id"};
    for (int g = 0; g < ResampledTrajectory::kPoints; ++g)
        header.push_back("t" + std::to_string(g));
    write_csv_row(out, header);
    for (const auto& t : trajs) {
        std::vector<std::string> row = {t.patient_id, t.lesion_id};
        for (int g = 0; g < ResampledTrajectory::kPoints; ++g)
            row.push_back(format_double(normalized ? t.normalized[g] : t.volumes[g]));
        write_csv_row(out, row);
    }
}

std::vector<ResampledTrajectory> read_resampled_csv(const std::string& path) {
    const auto table = read_csv_file(path, "resample");
    const int pc = table.require_column("patient_id", "resample");
    const int lc = table.require_column("lesion_id", "resample");
    std::array<int, ResampledTrajectory::kPoints> vc{};
    for (int g = 0; g < ResampledTrajectory::kPoints; ++g)
        vc[g] = table.require_column("t" + std::to_string(g), "resample");
    std::vector<ResampledTrajectory> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        ResampledTrajectory t;
        t.patient_id = table.rows[r][pc];
        t.lesion_id = table.rows[r][lc];
        t.observed.fill(true);
        for (int g = 0; g < ResampledTrajectory::kPoints; ++g)
            t.volumes[g] = parse_double_field(table.rows[r][vc[g]], "resample",
                                              table.line_numbers[r], "t" + std::to_string(g));
        t.normalized = normalize_volumes(t.volumes);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace bmt
