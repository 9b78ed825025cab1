#include "msmrf/regions.hpp"

#include <algorithm>
#include <unordered_set>

namespace msmrf {

namespace {

// Union-find with path halving and union by size.
struct DisjointSet {
    std::vector<int> parent;
    std::vector<int> size;

    explicit DisjointSet(size_t n) : parent(n), size(n, 1) {
        for (size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
    }
    int find(int i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    }
    void join(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
    }
};

}  // namespace

std::set<int> default_anomaly_states(int k_states) {
    if (k_states <= 1) return {1};
    return {1, 2};
}

std::vector<AnomalyRegion> extract_regions(const StateGrid& z, ScaleId scale,
                                           const MultiScaleLattice& lat,
                                           const ObservationSet& obs,
                                           const std::set<int>& anomaly_states) {
    const int S = z.locations, T = z.times;
    DisjointSet ds(static_cast<size_t>(S) * T);

    auto qualifies = [&](int s, int t) {
        const int k = z.at(s, t);
        return k >= 1 && anomaly_states.count(k) > 0;
    };

    for (int s = 0; s < S; ++s) {
        for (int t = 0; t < T; ++t) {
            if (!qualifies(s, t)) continue;
            const int k = z.at(s, t);
            if (t + 1 < T && z.at(s, t + 1) == k && qualifies(s, t + 1))
                ds.join(static_cast<int>(z.idx(s, t)), static_cast<int>(z.idx(s, t + 1)));
            for (int s2 : lat.neighbors(scale.l, s))
                if (s2 > s && z.at(s2, t) == k)
                    ds.join(static_cast<int>(z.idx(s, t)), static_cast<int>(z.idx(s2, t)));
        }
    }

    // Group cells by root, in (s, t) order so each region's cell list starts
    // with its lexicographically smallest cell.
    std::vector<int> region_of(static_cast<size_t>(S) * T, -1);
    std::vector<AnomalyRegion> regions;
    for (int s = 0; s < S; ++s) {
        for (int t = 0; t < T; ++t) {
            if (!qualifies(s, t)) continue;
            const int root = ds.find(static_cast<int>(z.idx(s, t)));
            if (region_of[root] < 0) {
                region_of[root] = static_cast<int>(regions.size());
                AnomalyRegion r;
                r.scale = scale;
                r.state = z.at(s, t);
                regions.push_back(std::move(r));
            }
            regions[region_of[root]].cells.push_back({s, t});
        }
    }

    for (auto& r : regions) region_stats(r, obs, lat);
    std::sort(regions.begin(), regions.end(), [](const AnomalyRegion& a, const AnomalyRegion& b) {
        if (a.state != b.state) return a.state < b.state;
        if (a.st_size != b.st_size) return a.st_size > b.st_size;
        const CellId& ca = a.cells.front();
        const CellId& cb = b.cells.front();
        return ca.s != cb.s ? ca.s < cb.s : ca.t < cb.t;
    });
    return regions;
}

void region_stats(AnomalyRegion& region, const ObservationSet& obs, const MultiScaleLattice& lat) {
    const ScaleGrid& x = obs.grid(lat.scale_index(region.scale));
    std::unordered_set<int> locs, times;
    double sum = 0.0;
    int n = 0;
    for (const CellId& c : region.cells) {
        locs.insert(c.s);
        times.insert(c.t);
        if (!x.is_missing(c.s, c.t)) {
            sum += x.at(c.s, c.t);
            ++n;
        }
    }
    region.st_size = static_cast<int>(region.cells.size());
    region.spatial_size = static_cast<int>(locs.size());
    region.temporal_size = static_cast<int>(times.size());
    region.mean_value = n ? sum / n : 0.0;
}

}  // namespace msmrf
