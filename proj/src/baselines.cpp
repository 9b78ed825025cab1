#include "msmrf/baselines.hpp"

#include <cmath>

#include "msmrf/errors.hpp"

namespace msmrf {

StateFieldSet threshold_detect(const ObservationSet& obs, const MultiScaleLattice& lat,
                               const std::vector<int>& states_per_scale, bool population_sd,
                               ThresholdParams* params_out) {
    if (static_cast<int>(states_per_scale.size()) != lat.num_scales())
        throw ShapeError("states_per_scale must cover every lattice scale");
    for (int k : states_per_scale)
        if (k != 2 && k != 3)
            throw ConfigError("threshold rule is defined for 2- or 3-state scales");

    ThresholdParams local;
    ThresholdParams& tp = params_out ? *params_out : local;
    tp.scales.assign(lat.num_scales(), {});
    tp.flagged.clear();

    StateFieldSet z = make_state_fields(lat, obs);

    for (int si = 0; si < lat.num_scales(); ++si) {
        const ScaleId sc = lat.scale_at(si);
        const ScaleGrid& x = obs.grid(si);
        auto& st = tp.scales[si];
        st.locations = x.locations;
        st.groups = lat.calendar_groups(sc.m);
        const size_t n = static_cast<size_t>(st.locations) * st.groups;
        st.mean.assign(n, 0.0);
        st.sd.assign(n, 0.0);

        std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
        std::vector<int> cnt(n, 0);
        for (int s = 0; s < x.locations; ++s) {
            for (int t = 0; t < x.times; ++t) {
                if (x.is_missing(s, t)) continue;
                const size_t i = st.idx(s, lat.calendar_of(sc.m, t));
                const double v = x.at(s, t);
                sum[i] += v;
                sumsq[i] += v * v;
                ++cnt[i];
            }
        }
        for (size_t i = 0; i < n; ++i) {
            if (cnt[i] == 0) continue;
            st.mean[i] = sum[i] / cnt[i];
            const int denom = population_sd ? cnt[i] : cnt[i] - 1;
            if (denom <= 0) {
                st.sd[i] = 0.0;
                tp.flagged.push_back("scale " + std::to_string(si) + " location " +
                                     std::to_string(i / st.groups) + " group " +
                                     std::to_string(i % st.groups));
                continue;
            }
            const double var = (sumsq[i] - sum[i] * sum[i] / cnt[i]) / denom;
            st.sd[i] = var > 0.0 ? std::sqrt(var) : 0.0;
        }

        StateGrid& zg = z.scales[si];
        const int K = states_per_scale[si];
        for (int s = 0; s < x.locations; ++s) {
            for (int t = 0; t < x.times; ++t) {
                if (x.is_missing(s, t)) continue;
                const size_t i = st.idx(s, lat.calendar_of(sc.m, t));
                const double v = x.at(s, t);
                if (K == 2) {
                    zg.set(s, t, v > st.mean[i] ? 1 : 2);
                } else {
                    if (v > st.mean[i] + st.sd[i])
                        zg.set(s, t, 1);
                    else if (v < st.mean[i] - st.sd[i])
                        zg.set(s, t, 2);
                    else
                        zg.set(s, t, 3);
                }
            }
        }
    }
    return z;
}

PosteriorSummary stmrf_detect(const ObservationSet& obs, const MultiScaleLattice& lat,
                              const ModelParams& params, const GibbsConfig& cfg) {
    GibbsConfig single = cfg;
    single.include_scale_edges = false;
    return run_inference(obs, lat, params, single);
}

}  // namespace msmrf
