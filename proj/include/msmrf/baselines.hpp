#pragma once

#include <string>
#include <vector>

#include "msmrf/inference.hpp"

namespace msmrf {

// Per (scale, location, calendar group) mean and standard deviation of the
// observation series, plus a record of degenerate (single-sample) groups.
struct ThresholdParams {
    struct ScaleStats {
        int locations = 0;
        int groups = 1;
        std::vector<double> mean;
        std::vector<double> sd;
        size_t idx(int s, int g) const { return static_cast<size_t>(s) * groups + g; }
    };
    std::vector<ScaleStats> scales;
    std::vector<std::string> flagged;  // groups where sd had to be taken as 0
};

// Local threshold detector: at 2-state scales Z = 1 if X > mean else 2; at
// 3-state scales Z = 1 above mean + sd, 2 below mean - sd, else 3, with
// boundary ties assigned to the normal state. `population_sd` selects the
// n-denominator convention (default) over n-1.
StateFieldSet threshold_detect(const ObservationSet& obs, const MultiScaleLattice& lat,
                               const std::vector<int>& states_per_scale,
                               bool population_sd = true, ThresholdParams* params_out = nullptr);

// Single-scale ST-MRF baseline: the identical Gibbs machinery with every
// scale-edge potential removed, so each scale is inferred independently.
PosteriorSummary stmrf_detect(const ObservationSet& obs, const MultiScaleLattice& lat,
                              const ModelParams& params, const GibbsConfig& cfg);

}  // namespace msmrf
