#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bmt/types.hpp"

namespace bmt {

struct GridInfo {
    std::array<int, 3> dims{};           // (nx, ny, nz)
    std::array<double, 3> spacing_mm{};  // all components > 0
    std::array<double, 3> origin_mm{};   // world position of voxel (0,0,0) center

    bool operator==(const GridInfo&) const = default;
    double voxel_volume() const { return spacing_mm[0] * spacing_mm[1] * spacing_mm[2]; }
    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
};

// 3D label map, x-fastest voxel order, 0 = background.
struct LabelVolume {
    GridInfo grid;
    std::vector<uint16_t> labels;
};

// One 26-connected foreground component. Voxel indices are sorted linear
// indices into the owning grid.
struct LesionComponent {
    int component_id = 0;
    long long voxel_count = 0;
    double volume_mm3 = 0.0;
    std::array<double, 3> centroid_mm{};
    std::vector<uint32_t> voxels;
};

struct ComponentSet {
    GridInfo grid;
    std::vector<LesionComponent> components;
};

// 26-connectivity labeling over nonzero voxels. Component ids are assigned in
// descending voxel count (ties by ascending centroid, lexicographic), so the
// output is deterministic. An all-zero volume yields an empty list.
ComponentSet connected_components(const LabelVolume& vol);

struct MatchResult {
    // (index into a.components, index into b.components)
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> appeared;     // indices into b
    std::vector<int> disappeared;  // indices into a
};

// Greedy matching by descending voxel overlap, then ascending centroid
// distance. Zero-overlap pairs are accepted within max_centroid_mm.
MatchResult match_components(const ComponentSet& a, const ComponentSet& b,
                             double max_centroid_mm = 10.0);

struct NewLesionRecord {
    std::string patient_id;
    long long first_day = 0;
    long long voxel_count = 0;
    double volume_mm3 = 0.0;
    std::array<double, 3> centroid_mm{};
};

struct TrackResult {
    std::vector<LesionTrajectory> trajectories;
    std::vector<NewLesionRecord> new_lesions;
    std::vector<std::string> notes;  // merge/split decisions and similar events
};

struct TrackOptions {
    double max_centroid_mm = 10.0;
    bool attach_shape_features = true;  // emit the built-in mask-shape set per record
};

// Chains components across consecutive time points. Lesions are seeded from
// the day-0 volume; chains starting later go to the new-lesion report.
// Disappeared lesions record volume 0 for the rest of the series.
TrackResult build_trajectories(const std::string& patient_id,
                               const std::vector<std::pair<long long, LabelVolume>>& series,
                               const TrackOptions& options = {});

// ---- volume files ----
// JSON sidecar (dims/spacing_mm/origin_mm/dtype "u16"/order "x-fastest") plus
// a raw little-endian binary of uint16 labels.
LabelVolume read_label_volume(const std::string& sidecar_path, const std::string& raw_path);
void write_label_volume(const std::string& sidecar_path, const std::string& raw_path,
                        const LabelVolume& vol);

struct SeriesEntry {
    std::string patient_id;
    long long day = 0;
    std::string volume_path;
    std::string sidecar_path;
};

// Manifest CSV: patient_id,day,volume_path,sidecar_path. Relative paths are
// resolved against the manifest's directory.
std::vector<SeriesEntry> read_series_manifest(const std::string& path);

void write_new_lesion_report(const std::string& path,
                             const std::vector<NewLesionRecord>& records);

}  // namespace bmt
