#pragma once

#include <optional>
#include <vector>

#include "msmrf/regions.hpp"

namespace msmrf {

// Mean same-state fractions at one scale; nullopt marks a metric that is
// undefined there (no spatial edges, or a single time step).
struct CoherenceReport {
    ScaleId scale;
    std::optional<double> spatial;
    std::optional<double> temporal;
};

// Mean fraction, over cells with at least one non-missing neighbor, of
// neighbors sharing the cell's state. Missing neighbors are excluded from
// the denominator.
std::optional<double> spatial_coherence(const StateGrid& z, ScaleId scale,
                                        const MultiScaleLattice& lat);

// Mean over locations of the fraction of successive time pairs with equal
// state; pairs with a missing endpoint are excluded.
std::optional<double> temporal_coherence(const StateGrid& z, ScaleId scale,
                                         const MultiScaleLattice& lat);

CoherenceReport coherence_report(const StateGrid& z, ScaleId scale, const MultiScaleLattice& lat);

// Per-state means over a set of regions; absent states get nullopt fields.
struct SizeSummaryRow {
    int state = 0;
    int count = 0;
    std::optional<double> mean_st_size;
    std::optional<double> mean_spatial_size;
    std::optional<double> mean_temporal_size;
    std::optional<double> mean_value;
};

std::vector<SizeSummaryRow> size_summary(const std::vector<AnomalyRegion>& regions,
                                         int max_state = 3);

// Cross-scale statistics conditioned on the country-annual state. months_*
// fields condition on years (counts of anomalous months under those years);
// loc_annual_* condition on years (grid-annual cells); loc_monthly_* are the
// months-conditional variant (grid-monthly cells in anomalous months).
struct CrossScaleRow {
    int state = 0;
    int n_years = 0;
    std::optional<double> mean_count_months;
    std::optional<double> months_coherence;
    std::optional<double> months_mean_x;
    std::optional<double> mean_count_loc_annual;
    std::optional<double> loc_annual_coherence;
    std::optional<double> loc_annual_mean_x;
    int n_months = 0;
    std::optional<double> mean_count_loc_monthly;
    std::optional<double> loc_monthly_coherence;
    std::optional<double> loc_monthly_mean_x;
};

struct CrossScaleReport {
    std::vector<CrossScaleRow> rows;  // one per anomaly type k in {1, 2}
};

// Requires at least 2 spatial and 2 temporal scales; the finest and coarsest
// scale along each axis play the grid/country and monthly/annual roles.
CrossScaleReport cross_scale_report(const StateFieldSet& z, const ObservationSet& obs,
                                    const MultiScaleLattice& lat);

struct LabelScore {
    int label = 0;
    long tp = 0, fp = 0, fn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Per-label precision/recall/F1 treating each label as the positive class;
// cells missing (label 0) in the truth are excluded.
std::vector<LabelScore> score_against_truth(const StateGrid& pred, const StateGrid& truth);

}  // namespace msmrf
