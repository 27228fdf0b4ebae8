#include <algorithm>
#include <numeric>

#include "bmt/track.hpp"

namespace bmt {

namespace {

// Union-find with path halving.
struct DisjointSet {
    std::vector<uint32_t> parent;

    explicit DisjointSet(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0u);
    }
    uint32_t find(uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(uint32_t a, uint32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

ComponentSet connected_components(const LabelVolume& vol) {
    const auto& g = vol.grid;
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    if (nx <= 0 || ny <= 0 || nz <= 0)
        throw ValidationError("track", "volume dims must be positive");
    if (vol.labels.size() != g.voxel_count())
        throw ValidationError("track", "label buffer size does not match dims");

    const std::size_t n = vol.labels.size();
    // Provisional label per voxel: 0 = background, otherwise voxel index + 1
    // mapped through union-find.
    DisjointSet ds(n);
    std::vector<char> fg(n, 0);
    for (std::size_t i = 0; i < n; ++i) fg[i] = vol.labels[i] != 0;

    auto index = [&](int x, int y, int z) {
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * (y + static_cast<std::size_t>(ny) * z);
    };

    // Scan order z,y,x ascending; union with the 13 already-visited neighbors
    // of the 26-neighborhood.
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                const std::size_t i = index(x, y, z);
                if (!fg[i]) continue;
                for (int dz = -1; dz <= 0; ++dz) {
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
                            const int X = x + dx, Y = y + dy, Z = z + dz;
                            if (X < 0 || X >= nx || Y < 0 || Y >= ny || Z < 0) continue;
                            const std::size_t j = index(X, Y, Z);
                            if (fg[j]) ds.unite(static_cast<uint32_t>(i), static_cast<uint32_t>(j));
                        }
                    }
                }
            }
        }
    }

    // Gather voxels per root.
    std::map<uint32_t, std::vector<uint32_t>> by_root;
    for (std::size_t i = 0; i < n; ++i)
        if (fg[i]) by_root[ds.find(static_cast<uint32_t>(i))].push_back(static_cast<uint32_t>(i));

    ComponentSet out;
    out.grid = g;
    for (auto& [root, voxels] : by_root) {
        LesionComponent comp;
        comp.voxel_count = static_cast<long long>(voxels.size());
        comp.volume_mm3 = static_cast<double>(voxels.size()) * g.voxel_volume();
        double cx = 0, cy = 0, cz = 0;
        for (uint32_t v : voxels) {
            const int x = static_cast<int>(v % nx);
            const int y = static_cast<int>((v / nx) % ny);
            const int z = static_cast<int>(v / (static_cast<std::size_t>(nx) * ny));
            cx += x;
            cy += y;
            cz += z;
        }
        const double inv = 1.0 / static_cast<double>(voxels.size());
        comp.centroid_mm = {g.origin_mm[0] + cx * inv * g.spacing_mm[0],
                            g.origin_mm[1] + cy * inv * g.spacing_mm[1],
                            g.origin_mm[2] + cz * inv * g.spacing_mm[2]};
        comp.voxels = std::move(voxels);  // already sorted: gathered in scan order
        out.components.push_back(std::move(comp));
    }

    std::sort(out.components.begin(), out.components.end(),
              [](const LesionComponent& a, const LesionComponent& b) {
                  if (a.voxel_count != b.voxel_count) return a.voxel_count > b.voxel_count;
                  return a.centroid_mm < b.centroid_mm;
              });
    for (std::size_t i = 0; i < out.components.size(); ++i)
        out.components[i].component_id = static_cast<int>(i + 1);
    return out;
}

}  // namespace bmt
