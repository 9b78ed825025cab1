#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "msmrf/model.hpp"

namespace msmrf {

// A planted ground-truth anomaly: either an axis-aligned box in base-scale
// (location, time) index space or an explicit cell set, with a mean shift.
struct PlantedRegion {
    int state = 1;       // 1 positive, 2 negative
    double delta = 0.0;  // mean shift magnitude, must be nonzero
    int s0 = 0, s1 = -1, t0 = 0, t1 = -1;  // inclusive box, used when cells empty
    std::vector<CellId> cells;
};

// Background emission parameters per (location, calendar month); scalars or
// per-month vectors broadcast over locations.
struct SynthConfig {
    nlohmann::json lattice;
    EmissionFamily family = EmissionFamily::Gaussian;
    std::vector<double> mean;    // gaussian mean / gamma mean, per month
    std::vector<double> stddev;  // gaussian stddev, per month
    std::vector<double> shape;   // gamma shape, per month
    std::vector<double> zero_mass;
    std::vector<PlantedRegion> planted;
    std::uint64_t seed = 0;

    static SynthConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct SynthResult {
    ObservationSet observations;  // base scale populated
    StateFieldSet truth;          // all scales; 1/2 anomalous, 3 normal
};

// Samples base-scale observations from the background distributions, shifts
// means inside planted regions (+delta positive, -delta negative, clamped at
// 0 under the Gamma family), and derives coarse ground truth by marking a
// coarse cell anomalous iff more than half of its children share one anomaly
// type. Deterministic given the seed.
SynthResult generate(const SynthConfig& cfg, const MultiScaleLattice& lat);

}  // namespace msmrf
