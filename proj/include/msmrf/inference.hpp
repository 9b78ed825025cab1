#pragma once

#include <cstdint>
#include <vector>

#include "msmrf/model.hpp"
#include "msmrf/rng.hpp"

namespace msmrf {

enum class InitMode { Mixture, UniformRandom, Provided };

struct GibbsConfig {
    int burn_in = 500;
    int samples = 100;
    int thin = 5;
    int refit_every = 10;  // 0 = never refit emissions
    std::uint64_t seed = 0;
    InitMode init = InitMode::Mixture;
    const StateFieldSet* provided = nullptr;  // used when init == Provided
    bool include_scale_edges = true;
    bool keep_snapshots = false;
    int chains = 1;

    void check() const;
};

// Per-cell empirical posterior from retained Gibbs snapshots. Marginals for
// scale i are stored flat as (s*T + t)*K + k; missing cells have an all-zero
// marginal and MAP label 0.
struct PosteriorSummary {
    StateFieldSet map_states;
    std::vector<std::vector<double>> marginals;
    int n_samples = 0;
    std::vector<StateFieldSet> snapshots;  // filled only when keep_snapshots

    const double* marginal(int scale_index, int s, int t, int times, int k_states) const {
        return marginals[scale_index].data() +
               (static_cast<size_t>(s) * times + t) * k_states;
    }
};

// Edge-independent initialization: per scale, fits a K-component mixture of
// the scale's emission family (parameters tied per location/calendar group)
// by EM and assigns each cell its most likely component. Collapsed
// components are reinitialized from random data points, at most 5 restarts.
StateFieldSet initialize_states(const ObservationSet& obs, const MultiScaleLattice& lat,
                                const ModelParams& params, const GibbsConfig& cfg);

// Full conditional of one cell's state given all others: data potential plus
// every incident spatial, temporal and (optionally) scale edge, normalized
// by log-sum-exp. Missing neighbors contribute nothing.
std::vector<double> local_conditional(ScaleId scale, int s, int t, const StateFieldSet& z,
                                      const ObservationSet& obs, const MultiScaleLattice& lat,
                                      const ModelParams& params,
                                      bool include_scale_edges = true);

// One deterministic raster sweep: scales in (l, m) order, cells in row-major
// (s, t) order, each non-missing cell resampled from its full conditional.
void gibbs_sweep(StateFieldSet& z, const ObservationSet& obs, const MultiScaleLattice& lat,
                 const ModelParams& params, Rng& rng, bool include_scale_edges = true);

// Initialization, burn-in, sampling with thinning, interleaved emission
// refits; returns the pooled posterior summary. With cfg.chains > 1,
// independent chains run concurrently (seeds derived from cfg.seed) and
// their snapshots are pooled.
PosteriorSummary run_inference(const ObservationSet& obs, const MultiScaleLattice& lat,
                               const ModelParams& params, const GibbsConfig& cfg);

// Log of Eq-style joint likelihood: sum of all data, temporal, spatial and
// scale-edge log potentials for a full state assignment.
double joint_log_likelihood(const StateFieldSet& z, const ObservationSet& obs,
                            const MultiScaleLattice& lat, const ModelParams& params,
                            bool include_scale_edges = true);

// Exact per-cell marginals by enumerating every joint configuration.
// Throws SizeError when the state space exceeds 2^20 configurations.
std::vector<std::vector<double>> exact_marginals(const ObservationSet& obs,
                                                 const MultiScaleLattice& lat,
                                                 const ModelParams& params);

}  // namespace msmrf
