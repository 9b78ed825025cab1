#include "msmrf/synth.hpp"

#include <algorithm>
#include <cmath>

#include "msmrf/errors.hpp"
#include "msmrf/rng.hpp"

namespace msmrf {

namespace {

std::vector<double> month_vector(const nlohmann::json& j, const char* key, double fallback,
                                 int months) {
    std::vector<double> v;
    if (!j.contains(key)) {
        v.assign(months, fallback);
        return v;
    }
    const auto& e = j.at(key);
    if (e.is_number()) {
        v.assign(months, e.get<double>());
    } else {
        v = e.get<std::vector<double>>();
        if (static_cast<int>(v.size()) != months)
            throw ConfigError(std::string(key) + " must be a scalar or one value per month");
    }
    return v;
}

}  // namespace

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
    SynthConfig cfg;
    cfg.lattice = j.at("lattice");
    const std::string fam = j.value("family", "gaussian");
    if (fam == "gaussian")
        cfg.family = EmissionFamily::Gaussian;
    else if (fam == "gamma")
        cfg.family = EmissionFamily::Gamma;
    else
        throw ConfigError("unknown noise family: " + fam);
    const int months = cfg.lattice.value("months_per_year", 12);
    cfg.mean = month_vector(j, "mean", 5.0, months);
    cfg.stddev = month_vector(j, "stddev", 1.0, months);
    cfg.shape = month_vector(j, "shape", 2.0, months);
    cfg.zero_mass = month_vector(j, "zero_mass", 0.0, months);
    cfg.seed = j.value("seed", 0ULL);
    for (const auto& pj : j.value("planted", nlohmann::json::array())) {
        PlantedRegion r;
        r.state = pj.at("state").get<int>();
        r.delta = pj.at("delta").get<double>();
        if (pj.contains("cells")) {
            for (const auto& c : pj.at("cells"))
                r.cells.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
        } else {
            r.s0 = pj.at("s0").get<int>();
            r.s1 = pj.at("s1").get<int>();
            r.t0 = pj.at("t0").get<int>();
            r.t1 = pj.at("t1").get<int>();
        }
        cfg.planted.push_back(std::move(r));
    }
    return cfg;
}

nlohmann::json SynthConfig::to_json() const {
    nlohmann::json j;
    j["lattice"] = lattice;
    j["family"] = family == EmissionFamily::Gaussian ? "gaussian" : "gamma";
    j["mean"] = mean;
    j["stddev"] = stddev;
    j["shape"] = shape;
    j["zero_mass"] = zero_mass;
    j["seed"] = seed;
    j["planted"] = nlohmann::json::array();
    for (const auto& r : planted) {
        nlohmann::json pj = {{"state", r.state}, {"delta", r.delta}};
        if (!r.cells.empty()) {
            pj["cells"] = nlohmann::json::array();
            for (const auto& c : r.cells) pj["cells"].push_back({c.s, c.t});
        } else {
            pj["s0"] = r.s0;
            pj["s1"] = r.s1;
            pj["t0"] = r.t0;
            pj["t1"] = r.t1;
        }
        j["planted"].push_back(std::move(pj));
    }
    return j;
}

SynthResult generate(const SynthConfig& cfg, const MultiScaleLattice& lat) {
    const int S = lat.spatial_size(0);
    const int T = lat.temporal_size(0);
    const int months = lat.months_per_year();

    // Base-scale truth from the planted regions; conflicting overlaps are a
    // config error, same-type overlaps merge.
    StateGrid base_truth(S, T);
    std::fill(base_truth.z.begin(), base_truth.z.end(), 3);
    std::vector<double> shift(static_cast<size_t>(S) * T, 0.0);
    for (const auto& r : cfg.planted) {
        if (r.state != 1 && r.state != 2)
            throw ConfigError("planted region state must be 1 or 2");
        if (r.delta == 0.0) throw ConfigError("planted region delta must be nonzero");
        std::vector<CellId> cells = r.cells;
        if (cells.empty()) {
            if (r.s0 < 0 || r.s1 >= S || r.t0 < 0 || r.t1 >= T || r.s0 > r.s1 || r.t0 > r.t1)
                throw ConfigError("planted box out of lattice bounds");
            for (int s = r.s0; s <= r.s1; ++s)
                for (int t = r.t0; t <= r.t1; ++t) cells.push_back({s, t});
        }
        const double signed_delta = (r.state == 1 ? 1.0 : -1.0) * std::abs(r.delta);
        for (const CellId& c : cells) {
            if (c.s < 0 || c.s >= S || c.t < 0 || c.t >= T)
                throw ConfigError("planted cell out of lattice bounds");
            const int prev = base_truth.at(c.s, c.t);
            if (prev != 3 && prev != r.state)
                throw ConfigError("planted regions of conflicting types overlap");
            base_truth.set(c.s, c.t, r.state);
            shift[base_truth.idx(c.s, c.t)] = signed_delta;
        }
    }

    // Sample observations in fixed (s, t) order.
    SynthResult out;
    out.observations = ObservationSet(lat);
    ScaleGrid& x = out.observations.grid(ScaleId{0, 0});
    Rng rng(cfg.seed);
    for (int s = 0; s < S; ++s) {
        for (int t = 0; t < T; ++t) {
            const int mo = t % months;
            const double d = shift[x.idx(s, t)];
            if (cfg.family == EmissionFamily::Gaussian) {
                x.set(s, t, cfg.mean[mo] + d + cfg.stddev[mo] * rng.normal());
            } else {
                const double m = std::max(cfg.mean[mo] + d, 0.0);
                const double pi0 = cfg.zero_mass[mo];
                if (rng.uniform() < pi0 || m <= 0.0) {
                    x.set(s, t, 0.0);
                } else {
                    const double a = cfg.shape[mo];
                    x.set(s, t, rng.gamma(a) * m / a);  // rate = shape / mean
                }
            }
        }
    }

    // Coarse truth: temporal sweeps along l = 0, then spatial sweeps, a cell
    // anomalous iff > 50% of its children carry the same anomaly type.
    out.truth.scales.resize(lat.num_scales());
    out.truth.scales[lat.scale_index({0, 0})] = base_truth;
    auto majority = [](const std::vector<int>& labels) {
        int n1 = 0, n2 = 0;
        for (int k : labels) {
            if (k == 1) ++n1;
            if (k == 2) ++n2;
        }
        const int n = static_cast<int>(labels.size());
        if (2 * n1 > n) return 1;
        if (2 * n2 > n) return 2;
        return 3;
    };
    for (int m = 1; m < lat.num_temporal_scales(); ++m) {
        const StateGrid& fine = out.truth.grid(lat.scale_index({0, m - 1}));
        StateGrid coarse(S, lat.temporal_size(m));
        for (int s = 0; s < S; ++s) {
            for (int t = 0; t < coarse.times; ++t) {
                std::vector<int> kids;
                for (int tc : lat.children_temporal(m, t)) kids.push_back(fine.at(s, tc));
                coarse.set(s, t, majority(kids));
            }
        }
        out.truth.scales[lat.scale_index({0, m})] = std::move(coarse);
    }
    for (int l = 1; l < lat.num_spatial_scales(); ++l) {
        for (int m = 0; m < lat.num_temporal_scales(); ++m) {
            const StateGrid& fine = out.truth.grid(lat.scale_index({l - 1, m}));
            StateGrid coarse(lat.spatial_size(l), lat.temporal_size(m));
            for (int s = 0; s < coarse.locations; ++s) {
                const auto& kids_s = lat.children_spatial(l, s);
                for (int t = 0; t < coarse.times; ++t) {
                    std::vector<int> kids;
                    for (int sc : kids_s) kids.push_back(fine.at(sc, t));
                    coarse.set(s, t, majority(kids));
                }
            }
            out.truth.scales[lat.scale_index({l, m})] = std::move(coarse);
        }
    }
    return out;
}

}  // namespace msmrf
