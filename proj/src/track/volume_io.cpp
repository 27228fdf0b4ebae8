#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "bmt/csv.hpp"
#include "bmt/track.hpp"

namespace bmt {

namespace {
namespace fs = std::filesystem;
using nlohmann::json;
}  // namespace

LabelVolume read_label_volume(const std::string& sidecar_path, const std::string& raw_path) {
    std::ifstream sc(sidecar_path);
    if (!sc) throw IoError("track", "cannot open sidecar", sidecar_path);
    json j;
    try {
        sc >> j;
    } catch (const json::exception& e) {
        throw ValidationError("track", std::string("invalid sidecar JSON: ") + e.what(),
                              sidecar_path);
    }

    LabelVolume vol;
    try {
        auto dims = j.at("dims");
        auto spacing = j.at("spacing_mm");
        auto origin = j.at("origin_mm");
        for (int i = 0; i < 3; ++i) {
            vol.grid.dims[i] = dims.at(i).get<int>();
            vol.grid.spacing_mm[i] = spacing.at(i).get<double>();
            vol.grid.origin_mm[i] = origin.at(i).get<double>();
        }
        if (j.at("dtype").get<std::string>() != "u16")
            throw ValidationError("track", "unsupported dtype", j.at("dtype").get<std::string>());
        if (j.at("order").get<std::string>() != "x-fastest")
            throw ValidationError("track", "unsupported voxel order",
                                  j.at("order").get<std::string>());
    } catch (const json::exception& e) {
        throw ValidationError("track", std::string("sidecar missing field: ") + e.what(),
                              sidecar_path);
    }
    for (int i = 0; i < 3; ++i) {
        if (vol.grid.dims[i] <= 0)
            throw ValidationError("track", "dims must be positive", sidecar_path);
        if (vol.grid.spacing_mm[i] <= 0.0)
            throw ValidationError("track", "spacing must be positive", sidecar_path);
    }

    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw) throw IoError("track", "cannot open volume", raw_path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(raw)),
                                     std::istreambuf_iterator<char>());
    const std::size_t expected = vol.grid.voxel_count() * 2;
    if (bytes.size() != expected)
        throw ValidationError("track",
                              "volume size mismatch: got " + std::to_string(bytes.size()) +
                                  " bytes, expected " + std::to_string(expected),
                              raw_path);
    vol.labels.resize(vol.grid.voxel_count());
    for (std::size_t i = 0; i < vol.labels.size(); ++i) {
        vol.labels[i] = static_cast<uint16_t>(bytes[2 * i] |
                                              (static_cast<uint16_t>(bytes[2 * i + 1]) << 8));
    }
    return vol;
}

void write_label_volume(const std::string& sidecar_path, const std::string& raw_path,
                        const LabelVolume& vol) {
    if (vol.labels.size() != vol.grid.voxel_count())
        throw ValidationError("track", "label buffer size does not match dims");
    json j;
    j["dims"] = vol.grid.dims;
    j["spacing_mm"] = vol.grid.spacing_mm;
    j["origin_mm"] = vol.grid.origin_mm;
    j["dtype"] = "u16";
    j["order"] = "x-fastest";
    std::ofstream sc(sidecar_path);
    if (!sc) throw IoError("track", "cannot write sidecar", sidecar_path);
    sc << j.dump(2) << '\n';

    std::ofstream raw(raw_path, std::ios::binary);
    if (!raw) throw IoError("track", "cannot write volume", raw_path);
    for (uint16_t v : vol.labels) {
        const unsigned char lo = static_cast<unsigned char>(v & 0xff);
        const unsigned char hi = static_cast<unsigned char>(v >> 8);
        raw.put(static_cast<char>(lo));
        raw.put(static_cast<char>(hi));
    }
}

std::vector<SeriesEntry> read_series_manifest(const std::string& path) {
    const CsvTable table = read_csv_file(path, "track");
    const int pc = table.require_column("patient_id", "track");
    const int dc = table.require_column("day", "track");
    const int vc = table.require_column("volume_path", "track");
    const int sc = table.require_column("sidecar_path", "track");

    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        if (fp.is_relative()) fp = base / fp;
        return fp.string();
    };

    std::vector<SeriesEntry> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        SeriesEntry e;
        e.patient_id = table.rows[r][pc];
        e.day = parse_int_field(table.rows[r][dc], "track", table.line_numbers[r], "day");
        e.volume_path = resolve(table.rows[r][vc]);
        e.sidecar_path = resolve(table.rows[r][sc]);
        out.push_back(std::move(e));
    }
    return out;
}

void write_new_lesion_report(const std::string& path,
                             const std::vector<NewLesionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("track", "cannot write file", path);
    write_csv_row(out, {"patient_id", "first_day", "voxel_count", "volume_mm3", "centroid_x_mm",
                        "centroid_y_mm", "centroid_z_mm"});
    for (const auto& r : records) {
        write_csv_row(out, {r.patient_id, std::to_string(r.first_day),
                            std::to_string(r.voxel_count), format_double(r.volume_mm3),
                            format_double(r.centroid_mm[0]), format_double(r.centroid_mm[1]),
                            format_double(r.centroid_mm[2])});
    }
}

}  // namespace bmt
