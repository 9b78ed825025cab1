#pragma once

#include <string>
#include <vector>

#include "msmrf/lattice.hpp"

namespace msmrf {

// Dense (locations x times) grid of measurements with a missing-value mask.
struct ScaleGrid {
    int locations = 0;
    int times = 0;
    std::vector<double> value;
    std::vector<unsigned char> miss;

    ScaleGrid() = default;
    ScaleGrid(int s, int t)
        : locations(s), times(t),
          value(static_cast<size_t>(s) * t, 0.0),
          miss(static_cast<size_t>(s) * t, 0) {}

    size_t idx(int s, int t) const { return static_cast<size_t>(s) * times + t; }
    double at(int s, int t) const { return value[idx(s, t)]; }
    bool is_missing(int s, int t) const { return miss[idx(s, t)] != 0; }
    void set(int s, int t, double v) { value[idx(s, t)] = v; }
    void set_missing(int s, int t) { miss[idx(s, t)] = 1; }
};

// One measurement grid per scale, mean-aggregated upward from the base
// scale (0,0). Immutable after aggregation.
class ObservationSet {
public:
    ObservationSet() = default;
    explicit ObservationSet(const MultiScaleLattice& lat);

    const ScaleGrid& grid(ScaleId sc) const { return grids_.at(scale_index(sc)); }
    ScaleGrid& grid(ScaleId sc) { return grids_[scale_index(sc)]; }
    const ScaleGrid& grid(int scale_index) const { return grids_.at(scale_index); }
    ScaleGrid& grid(int scale_index) { return grids_[scale_index]; }

    int num_scales() const { return static_cast<int>(grids_.size()); }
    bool aggregated() const { return aggregated_; }
    void mark_aggregated() { aggregated_ = true; }

private:
    int scale_index(ScaleId sc) const { return sc.l * n_temporal_ + sc.m; }
    std::vector<ScaleGrid> grids_;
    int n_temporal_ = 1;
    bool aggregated_ = false;

    friend ObservationSet aggregate(const ObservationSet&, const MultiScaleLattice&);
};

struct CsvOptions {
    std::string missing_token = "NA";
    char delimiter = ',';
};

// Reads a headerless CSV (rows = base-scale locations, columns = base-scale
// time steps) into the base scale of a fresh ObservationSet. If a sidecar
// file "<path>.json" exists it may override {"missing_token", "delimiter"}.
ObservationSet load_observations(const std::string& path, const MultiScaleLattice& lat);

ObservationSet load_observations(const std::string& path, const MultiScaleLattice& lat,
                                 const CsvOptions& opts);

// Fills every coarser scale with arithmetic means of the (non-missing)
// child cells: temporal aggregation first, then spatial. A coarse cell whose
// children are all missing stays missing.
ObservationSet aggregate(const ObservationSet& base, const MultiScaleLattice& lat);

void write_observations_csv(const ScaleGrid& grid, const std::string& path,
                            const CsvOptions& opts = {});

}  // namespace msmrf
