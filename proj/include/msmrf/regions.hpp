#pragma once

#include <set>
#include <vector>

#include "msmrf/model.hpp"

namespace msmrf {

// A maximal connected set of same-state cells at one scale, under the
// spatio-temporal adjacency (spatial neighbors at equal t, or equal s at
// |dt| = 1), with its summary statistics.
struct AnomalyRegion {
    ScaleId scale;
    int state = 0;
    std::vector<CellId> cells;
    int st_size = 0;
    int spatial_size = 0;
    int temporal_size = 0;
    double mean_value = 0.0;
};

// Default anomaly labels for a K-state scale: {1, 2} both for the 2-state
// case (both labels form regions) and the 3-state case (3 = normal).
std::set<int> default_anomaly_states(int k_states);

// Connected components over cells whose label is in anomaly_states, merging
// only same-label adjacent cells. Output is sorted by (state, -st_size,
// smallest cell) for determinism.
std::vector<AnomalyRegion> extract_regions(const StateGrid& z, ScaleId scale,
                                           const MultiScaleLattice& lat,
                                           const ObservationSet& obs,
                                           const std::set<int>& anomaly_states);

// Recomputes size fields and the mean observation over the region's cells.
void region_stats(AnomalyRegion& region, const ObservationSet& obs,
                  const MultiScaleLattice& lat);

}  // namespace msmrf
