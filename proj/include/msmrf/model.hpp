#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "msmrf/data.hpp"
#include "msmrf/lattice.hpp"

namespace msmrf {

// Discrete anomaly-state grid for one scale. Label 0 is reserved for cells
// whose observation is missing; real states are 1..K.
struct StateGrid {
    int locations = 0;
    int times = 0;
    std::vector<int> z;

    StateGrid() = default;
    StateGrid(int s, int t)
        : locations(s), times(t), z(static_cast<size_t>(s) * t, 0) {}

    size_t idx(int s, int t) const { return static_cast<size_t>(s) * times + t; }
    int at(int s, int t) const { return z[idx(s, t)]; }
    void set(int s, int t, int k) { z[idx(s, t)] = k; }
};

// One StateGrid per scale, indexed like the lattice's scale_index.
struct StateFieldSet {
    std::vector<StateGrid> scales;

    StateGrid& grid(int scale_index) { return scales[scale_index]; }
    const StateGrid& grid(int scale_index) const { return scales.at(scale_index); }
};

StateFieldSet make_state_fields(const MultiScaleLattice& lat, const ObservationSet& obs);

enum class EdgeClass { Spatial, Temporal, SpatialScale, TemporalScale };

// Log-domain pairwise potential values: log psi = high when the endpoint
// states agree, low otherwise. high >= low promotes coherence.
struct ClassWeights {
    double high = 0.0;
    double low = 0.0;
};

// Weights per edge class at one scale. Scale-edge weights stored here apply
// to the edges joining this scale to the next COARSER one along the given
// axis; edges to finer scales use the finer scale's entry, so each edge is
// scored identically from both endpoints. spatial_pair holds optional
// per-pair overrides for spatial edges, keyed by (min(s,s'), max(s,s')).
struct ScaleWeights {
    ClassWeights spatial;
    ClassWeights temporal;
    ClassWeights spatial_scale;
    ClassWeights temporal_scale;
    std::map<std::pair<int, int>, ClassWeights> spatial_pair;

    const ClassWeights& of(EdgeClass c) const {
        switch (c) {
            case EdgeClass::Spatial: return spatial;
            case EdgeClass::Temporal: return temporal;
            case EdgeClass::SpatialScale: return spatial_scale;
            default: return temporal_scale;
        }
    }
    ClassWeights& of(EdgeClass c) {
        return const_cast<ClassWeights&>(static_cast<const ScaleWeights*>(this)->of(c));
    }
    const ClassWeights& spatial_for(int s1, int s2) const {
        if (!spatial_pair.empty()) {
            auto it = spatial_pair.find({std::min(s1, s2), std::max(s1, s2)});
            if (it != spatial_pair.end()) return it->second;
        }
        return spatial;
    }
};

// Per-model edge weights, one ScaleWeights per scale index.
using EdgeWeights = std::vector<ScaleWeights>;

enum class EmissionFamily { Gaussian, Gamma };

// Emission parameters for one scale: one parameter set per
// (location, calendar group, state), flattened as (s*groups + g)*k_states + k.
// Gaussian: a = mean, b = stddev. Gamma: a = shape, b = rate, plus a zero
// point-mass (zero-inflation); zero_mass = 0 recovers a plain Gamma.
struct ScaleEmissions {
    EmissionFamily family = EmissionFamily::Gaussian;
    int locations = 0;
    int groups = 1;
    int k_states = 0;
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> zero_mass;

    size_t idx(int s, int g, int k) const {
        return (static_cast<size_t>(s) * groups + g) * k_states + k;
    }
    void resize() {
        const size_t n = static_cast<size_t>(locations) * groups * k_states;
        a.assign(n, 0.0);
        b.assign(n, 1.0);
        zero_mass.assign(n, 0.0);
    }
    // Mean of the state-k distribution pooled over all (location, group)
    // cells, used for canonical state ordering.
    double pooled_mean(int k) const;
};

struct ModelParams {
    std::vector<int> states_per_scale;  // K per scale index (2 or 3)
    EdgeWeights edge_weights;
    std::vector<ScaleEmissions> emissions;

    int k_at(int scale_index) const { return states_per_scale.at(scale_index); }
};

// log psi for a pairwise edge of class `c` at scale `scale`.
double pairwise_log_potential(EdgeClass c, int z1, int z2, const EdgeWeights& w,
                              const MultiScaleLattice& lat, ScaleId scale);

// Log-density of observation x under the state-z emission distribution for
// (location s, calendar group of t). Gamma scales use the zero-inflated
// form: x = 0 contributes log(zero_mass), x > 0 contributes
// log(1 - zero_mass) + log GammaPDF(x; shape, rate).
double data_log_potential(int z, double x, int s, int t, ScaleId scale, const ModelParams& p,
                          const MultiScaleLattice& lat);

// Fits emission parameters for one scale from hard state assignments:
// Gaussian groups get sample mean / sample stddev (n-1), Gamma groups get
// the zero fraction plus method-of-moments on the positive subsample.
// Groups with fewer than 2 members or zero variance fall back to the pooled
// (all-location, same group) estimate.
ScaleEmissions estimate_emissions(const ObservationSet& obs, const StateGrid& z, ScaleId scale,
                                  EmissionFamily family, int k_states,
                                  const MultiScaleLattice& lat);

// Correlation-derived default weights: per scale and class,
// high = coupling * mean positive Pearson correlation over connected pairs
// (clamped to [0.1, 1]) and low = 0.
EdgeWeights default_edge_weights(const ObservationSet& obs, const MultiScaleLattice& lat,
                                 double coupling = 2.0);

// Reorders state labels canonically by pooled emission mean (K=3: 1 highest,
// 2 lowest, 3 middle; K=2: 1 high, 2 low), permuting both the parameters and
// any state grids given. Returns the permutation applied (old label -> new).
std::vector<int> canonicalize_states(ScaleEmissions& em, StateGrid* z);

nlohmann::json model_params_to_json(const ModelParams& p);
ModelParams model_params_from_json(const nlohmann::json& j);

}  // namespace msmrf
