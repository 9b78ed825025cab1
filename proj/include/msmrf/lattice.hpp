#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace msmrf {

// A spatio-temporal scale: spatial resolution l, temporal resolution m.
// Index 0 is the finest retained resolution along each axis.
struct ScaleId {
    int l = 0;
    int m = 0;

    bool operator==(const ScaleId&) const = default;
};

struct CellId {
    int s = 0;  // location index, 0-based
    int t = 0;  // time index, 0-based

    bool operator==(const CellId&) const = default;
};

// Multi-scale spatio-temporal topology: per-scale grid sizes, spatial
// neighbor lists, and the coarsening maps between adjacent scales.
// Immutable after construction; shared reads from any number of threads
// are safe.
class MultiScaleLattice {
public:
    // Builds a lattice from a JSON config document:
    //
    //   {
    //     "spatial_scales":  [ {"size": N, "neighbors": [[..],..]}
    //                          | {"grid": {"rows": R, "cols": C,
    //                                      "mask": [0/1,..], "connectivity": 4|8}}, .. ],
    //     "temporal_scales": [ {"size": T}, .. ],
    //     "spatial_groups":  [ groups-for-step-0to1, .. ],
    //     "temporal_groups": [ .. ],
    //     "months_per_year": 12
    //   }
    //
    // where a coarsening step is either {"uniform": k} or an explicit list of
    // child-index groups, one group per parent location (groups need not be
    // uniform). Grid specs produce 4-connected neighborhoods restricted to
    // unmasked cells (8-connected when connectivity is 8).
    static MultiScaleLattice build(const nlohmann::json& config);
    static MultiScaleLattice build_from_file(const std::string& path);

    int num_spatial_scales() const { return static_cast<int>(spatial_sizes_.size()); }
    int num_temporal_scales() const { return static_cast<int>(temporal_sizes_.size()); }
    int num_scales() const { return num_spatial_scales() * num_temporal_scales(); }
    int months_per_year() const { return months_per_year_; }

    int spatial_size(int l) const;
    int temporal_size(int m) const;

    // Flat index of a scale, lexicographic in (l, m).
    int scale_index(ScaleId sc) const { return sc.l * num_temporal_scales() + sc.m; }
    ScaleId scale_at(int index) const {
        return {index / num_temporal_scales(), index % num_temporal_scales()};
    }

    // NB^l(s): spatial neighbors of s at spatial scale l, sorted ascending.
    const std::vector<int>& neighbors(int l, int s) const;

    int parent_spatial(int l, int s) const;
    const std::vector<int>& children_spatial(int l, int s) const;
    int parent_temporal(int m, int t) const;
    const std::vector<int>& children_temporal(int m, int t) const;

    bool has_spatial_parent(int l) const { return l + 1 < num_spatial_scales(); }
    bool has_temporal_parent(int m) const { return m + 1 < num_temporal_scales(); }

    // Calendar group of time t: t mod months_per_year at the finest temporal
    // scale, a single group at coarser scales.
    int calendar_groups(int m) const { return m == 0 ? months_per_year_ : 1; }
    int calendar_of(int m, int t) const { return m == 0 ? t % months_per_year_ : 0; }

private:
    std::vector<int> spatial_sizes_;
    std::vector<int> temporal_sizes_;
    int months_per_year_ = 12;

    // neighbors_[l][s] -> sorted adjacency
    std::vector<std::vector<std::vector<int>>> neighbors_;
    // spatial_parent_[l][s] -> parent location at scale l+1, for l < L_sp-1
    std::vector<std::vector<int>> spatial_parent_;
    // spatial_children_[l][s] -> child locations at scale l-1, for l >= 1
    std::vector<std::vector<std::vector<int>>> spatial_children_;
    std::vector<std::vector<int>> temporal_parent_;
    std::vector<std::vector<std::vector<int>>> temporal_children_;

    void check_spatial_scale(int l) const;
    void check_temporal_scale(int m) const;
    void validate() const;
};

}  // namespace msmrf
