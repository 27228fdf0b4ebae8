#include <algorithm>
#include <cmath>
#include <sstream>

#include "bmt/featspace.hpp"
#include "bmt/track.hpp"

namespace bmt {

namespace {

long long overlap_count(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
    long long n = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) ++i;
        else if (b[j] < a[i]) ++j;
        else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

double centroid_distance(const LesionComponent& a, const LesionComponent& b) {
    const double dx = a.centroid_mm[0] - b.centroid_mm[0];
    const double dy = a.centroid_mm[1] - b.centroid_mm[1];
    const double dz = a.centroid_mm[2] - b.centroid_mm[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

struct Candidate {
    long long overlap;
    double distance;
    int ai;
    int bi;
};

}  // namespace

MatchResult match_components(const ComponentSet& a, const ComponentSet& b,
                             double max_centroid_mm) {
    if (!(a.grid == b.grid))
        throw ValidationError("track", "grid mismatch: volumes are not spatially aligned");

    std::vector<Candidate> candidates;
    candidates.reserve(a.components.size() * b.components.size());
    for (int i = 0; i < static_cast<int>(a.components.size()); ++i) {
        for (int j = 0; j < static_cast<int>(b.components.size()); ++j) {
            Candidate c;
            c.overlap = overlap_count(a.components[i].voxels, b.components[j].voxels);
            c.distance = centroid_distance(a.components[i], b.components[j]);
            c.ai = i;
            c.bi = j;
            if (c.overlap > 0 || c.distance <= max_centroid_mm) candidates.push_back(c);
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        if (x.overlap != y.overlap) return x.overlap > y.overlap;
        if (x.distance != y.distance) return x.distance < y.distance;
        if (x.ai != y.ai) return x.ai < y.ai;
        return x.bi < y.bi;
    });

    MatchResult result;
    std::vector<char> a_used(a.components.size(), 0), b_used(b.components.size(), 0);
    for (const auto& c : candidates) {
        if (a_used[c.ai] || b_used[c.bi]) continue;
        a_used[c.ai] = b_used[c.bi] = 1;
        result.pairs.emplace_back(c.ai, c.bi);
    }
    for (int i = 0; i < static_cast<int>(a.components.size()); ++i)
        if (!a_used[i]) result.disappeared.push_back(i);
    for (int j = 0; j < static_cast<int>(b.components.size()); ++j)
        if (!b_used[j]) result.appeared.push_back(j);
    return result;
}

TrackResult build_trajectories(const std::string& patient_id,
                               const std::vector<std::pair<long long, LabelVolume>>& series,
                               const TrackOptions& options) {
    TrackResult result;
    if (series.empty()) return result;
    for (std::size_t i = 1; i < series.size(); ++i)
        if (series[i].first <= series[i - 1].first)
            throw ValidationError("track", "series days must be strictly ascending", patient_id);
    if (series.front().first != 0)
        throw ValidationError("track", "series must include a day-0 volume", patient_id);

    std::vector<ComponentSet> sets;
    sets.reserve(series.size());
    for (const auto& [day, vol] : series) sets.push_back(connected_components(vol));

    // Chain state: one entry per component chain, carrying the component index
    // at the current time point (-1 once disappeared).
    struct Chain {
        bool from_day0 = false;
        int current = -1;  // index into sets[k].components
        LesionTrajectory traj;
    };
    std::vector<Chain> chains;

    auto make_record = [&](long long day, const ComponentSet& set, int comp_index) {
        ScanRecord rec;
        rec.day = day;
        if (comp_index >= 0) {
            const auto& comp = set.components[comp_index];
            rec.volume_mm3 = comp.volume_mm3;
            if (options.attach_shape_features) {
                for (const auto& [name, value] : shape_features(comp, set.grid))
                    if (name != "volume_mm3") rec.features["shape_" + name] = value;
            }
        } else if (options.attach_shape_features) {
            // Disappeared lesion: zero volume, zero shape features.
            for (const auto& [name, value] : shape_features(LesionComponent{}, set.grid))
                if (name != "volume_mm3") rec.features["shape_" + name] = 0.0;
        }
        return rec;
    };

    // Seed chains from day 0.
    int lesion_counter = 0;
    for (int c = 0; c < static_cast<int>(sets[0].components.size()); ++c) {
        Chain chain;
        chain.from_day0 = true;
        chain.current = c;
        chain.traj.patient_id = patient_id;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "L%03d", ++lesion_counter);
        chain.traj.lesion_id = buf;
        chain.traj.records.push_back(make_record(0, sets[0], c));
        chains.push_back(std::move(chain));
    }

    for (std::size_t k = 0; k + 1 < series.size(); ++k) {
        const long long next_day = series[k + 1].first;
        const MatchResult match = match_components(sets[k], sets[k + 1], options.max_centroid_mm);

        std::vector<int> successor(sets[k].components.size(), -1);
        for (const auto& [ai, bi] : match.pairs) successor[ai] = bi;

        // Note contested components: two prior components whose best candidate
        // was the same successor (a merge) leave the loser at volume 0.
        for (const auto& [ai, bi] : match.pairs) {
            for (int other = 0; other < static_cast<int>(successor.size()); ++other) {
                if (other == ai || successor[other] != -1) continue;
                if (overlap_count(sets[k].components[other].voxels,
                                  sets[k + 1].components[bi].voxels) > 0) {
                    std::ostringstream note;
                    note << patient_id << ": day " << next_day << ": components "
                         << sets[k].components[ai].component_id << " and "
                         << sets[k].components[other].component_id
                         << " merged; larger overlap kept the component";
                    result.notes.push_back(note.str());
                }
            }
        }

        for (auto& chain : chains) {
            if (chain.current >= 0) chain.current = successor[chain.current];
            chain.traj.records.push_back(make_record(next_day, sets[k + 1], chain.current));
        }
        for (int bi : match.appeared) {
            Chain chain;
            chain.from_day0 = false;
            chain.current = bi;
            chain.traj.patient_id = patient_id;
            chain.traj.lesion_id = "";  // reported, never emitted as a trajectory
            const auto& comp = sets[k + 1].components[bi];
            result.new_lesions.push_back(NewLesionRecord{patient_id, next_day, comp.voxel_count,
                                                         comp.volume_mm3, comp.centroid_mm});
            chain.traj.records.push_back(make_record(next_day, sets[k + 1], bi));
            chains.push_back(std::move(chain));
        }
    }

    for (auto& chain : chains)
        if (chain.from_day0) result.trajectories.push_back(std::move(chain.traj));
    return result;
}

}  // namespace bmt
