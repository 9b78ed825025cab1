#include "msmrf/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msmrf/errors.hpp"

namespace msmrf {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double gaussian_logpdf(double x, double mean, double sd) {
    if (sd <= 0.0) throw ParameterError("gaussian stddev must be positive");
    const double u = (x - mean) / sd;
    return -std::log(sd) - 0.5 * (kLog2Pi + u * u);
}

double gamma_logpdf(double x, double shape, double rate) {
    if (shape <= 0.0 || rate <= 0.0) throw ParameterError("gamma shape/rate must be positive");
    return shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x - std::lgamma(shape);
}

// Pearson correlation of two aligned series over their jointly non-missing
// entries; nullopt when fewer than 2 points or either side is constant.
std::optional<double> pearson(const ScaleGrid& ga, int sa, const ScaleGrid& gb, int sb,
                              const std::vector<std::pair<int, int>>& t_pairs) {
    double sx = 0, sy = 0;
    int n = 0;
    for (auto [ta, tb] : t_pairs) {
        if (ga.is_missing(sa, ta) || gb.is_missing(sb, tb)) continue;
        sx += ga.at(sa, ta);
        sy += gb.at(sb, tb);
        ++n;
    }
    if (n < 2) return std::nullopt;
    const double mx = sx / n, my = sy / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (auto [ta, tb] : t_pairs) {
        if (ga.is_missing(sa, ta) || gb.is_missing(sb, tb)) continue;
        const double dx = ga.at(sa, ta) - mx;
        const double dy = gb.at(sb, tb) - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

struct PositiveMean {
    double sum = 0.0;
    int n = 0;
    void add(std::optional<double> r) {
        if (r && *r > 0.0) {
            sum += *r;
            ++n;
        }
    }
    // Mean positive correlation clamped to [0.1, 1]; 0.5 when no pair survived.
    double value() const {
        const double r = n ? sum / n : 0.5;
        return std::clamp(r, 0.1, 1.0);
    }
};

}  // namespace

StateFieldSet make_state_fields(const MultiScaleLattice& lat, const ObservationSet& obs) {
    StateFieldSet z;
    z.scales.reserve(lat.num_scales());
    for (int i = 0; i < lat.num_scales(); ++i) {
        const ScaleGrid& g = obs.grid(i);
        z.scales.emplace_back(g.locations, g.times);
    }
    return z;
}

double ScaleEmissions::pooled_mean(int k) const {
    double sum = 0.0;
    size_t n = 0;
    for (int s = 0; s < locations; ++s) {
        for (int g = 0; g < groups; ++g) {
            const size_t i = idx(s, g, k);
            const double m = family == EmissionFamily::Gaussian
                                 ? a[i]
                                 : (1.0 - zero_mass[i]) * a[i] / b[i];
            sum += m;
            ++n;
        }
    }
    return n ? sum / n : 0.0;
}

double pairwise_log_potential(EdgeClass c, int z1, int z2, const EdgeWeights& w,
                              const MultiScaleLattice& lat, ScaleId scale) {
    const ClassWeights& cw = w.at(lat.scale_index(scale)).of(c);
    return z1 == z2 ? cw.high : cw.low;
}

double data_log_potential(int z, double x, int s, int t, ScaleId scale, const ModelParams& p,
                          const MultiScaleLattice& lat) {
    const int si = lat.scale_index(scale);
    const ScaleEmissions& em = p.emissions.at(si);
    if (z < 1 || z > em.k_states) throw BoundsError("state label out of range");
    const int g = lat.calendar_of(scale.m, t);
    const size_t i = em.idx(s, g, z - 1);
    if (em.family == EmissionFamily::Gaussian) return gaussian_logpdf(x, em.a[i], em.b[i]);
    if (x < 0.0) throw DomainError("negative observation under gamma emissions");
    const double pi0 = em.zero_mass[i];
    if (x == 0.0) return std::log(pi0);  // -inf when pi0 == 0, by convention
    const double tail = pi0 < 1.0 ? std::log1p(-pi0) : -std::numeric_limits<double>::infinity();
    return tail + gamma_logpdf(x, em.a[i], em.b[i]);
}

namespace {

struct GroupStats {
    double sum = 0.0, sumsq = 0.0;
    int n = 0, zeros = 0;
    double psum = 0.0, psumsq = 0.0;  // positive subsample
    int pn = 0;

    void add(double x) {
        sum += x;
        sumsq += x * x;
        ++n;
        if (x == 0.0) {
            ++zeros;
        } else {
            psum += x;
            psumsq += x * x;
            ++pn;
        }
    }
    void merge(const GroupStats& o) {
        sum += o.sum;
        sumsq += o.sumsq;
        n += o.n;
        zeros += o.zeros;
        psum += o.psum;
        psumsq += o.psumsq;
        pn += o.pn;
    }
    double mean() const { return sum / n; }
    // Sample variance, n-1 denominator.
    double var() const { return n > 1 ? (sumsq - sum * sum / n) / (n - 1) : 0.0; }
    double pmean() const { return psum / pn; }
    double pvar() const { return pn > 1 ? (psumsq - psum * psum / pn) / (pn - 1) : 0.0; }
};

constexpr double kSdFloor = 1e-6;
constexpr double kAlphaMin = 1e-3;
constexpr double kAlphaMax = 1e6;

void fit_gaussian(const GroupStats& st, double& mean, double& sd) {
    mean = st.mean();
    sd = std::max(std::sqrt(std::max(st.var(), 0.0)), kSdFloor);
}

void fit_gamma(const GroupStats& st, double& shape, double& rate, double& pi0) {
    pi0 = st.n ? static_cast<double>(st.zeros) / st.n : 0.0;
    if (st.pn == 0) {
        // All-zero group: park a unit exponential behind the point mass.
        shape = 1.0;
        rate = 1.0;
        return;
    }
    const double m = st.pmean();
    const double v = std::max(st.pvar(), 1e-12 * std::max(1.0, m * m));
    shape = std::clamp(m * m / v, kAlphaMin, kAlphaMax);
    rate = shape / m;
}

}  // namespace

ScaleEmissions estimate_emissions(const ObservationSet& obs, const StateGrid& z, ScaleId scale,
                                  EmissionFamily family, int k_states,
                                  const MultiScaleLattice& lat) {
    const ScaleGrid& x = obs.grid(scale.l * lat.num_temporal_scales() + scale.m);
    if (x.locations != z.locations || x.times != z.times)
        throw ShapeError("state field does not match observation grid");

    ScaleEmissions em;
    em.family = family;
    em.locations = x.locations;
    em.groups = lat.calendar_groups(scale.m);
    em.k_states = k_states;
    em.resize();

    std::vector<GroupStats> stats(em.a.size());
    std::vector<GroupStats> pooled(static_cast<size_t>(em.groups) * k_states);
    for (int s = 0; s < x.locations; ++s) {
        for (int t = 0; t < x.times; ++t) {
            if (x.is_missing(s, t)) continue;
            const int k = z.at(s, t);
            if (k < 1 || k > k_states) continue;
            const double v = x.at(s, t);
            if (family == EmissionFamily::Gamma && v < 0.0)
                throw DomainError("negative observation under gamma emissions");
            stats[em.idx(s, lat.calendar_of(scale.m, t), k - 1)].add(v);
            pooled[static_cast<size_t>(lat.calendar_of(scale.m, t)) * k_states + k - 1].add(v);
        }
    }

    for (int g = 0; g < em.groups; ++g) {
        for (int k = 0; k < k_states; ++k) {
            const GroupStats& pool = pooled[static_cast<size_t>(g) * k_states + k];
            if (pool.n == 0)
                throw EstimationError("no observations for state " + std::to_string(k + 1) +
                                      " in calendar group " + std::to_string(g));
            for (int s = 0; s < em.locations; ++s) {
                const GroupStats& own = stats[em.idx(s, g, k)];
                const bool degenerate = own.n < 2 || own.var() <= 0.0;
                const GroupStats& use = degenerate ? pool : own;
                const size_t i = em.idx(s, g, k);
                if (family == EmissionFamily::Gaussian)
                    fit_gaussian(use, em.a[i], em.b[i]);
                else
                    fit_gamma(use, em.a[i], em.b[i], em.zero_mass[i]);
            }
        }
    }
    return em;
}

EdgeWeights default_edge_weights(const ObservationSet& obs, const MultiScaleLattice& lat,
                                 double coupling) {
    EdgeWeights w(lat.num_scales());
    for (int si = 0; si < lat.num_scales(); ++si) {
        const ScaleId sc = lat.scale_at(si);
        const ScaleGrid& g = obs.grid(si);
        const int S = g.locations, T = g.times;

        std::vector<std::pair<int, int>> same_t(T);
        for (int t = 0; t < T; ++t) same_t[t] = {t, t};

        // Spatial: neighbor-pair series correlations at this scale.
        PositiveMean sp;
        for (int s = 0; s < S; ++s)
            for (int s2 : lat.neighbors(sc.l, s))
                if (s < s2) sp.add(pearson(g, s, g, s2, same_t));
        w[si].spatial = {coupling * sp.value(), 0.0};

        // Temporal: lag-1 autocorrelation averaged over locations.
        PositiveMean tp;
        if (T >= 2) {
            std::vector<std::pair<int, int>> lag1(T - 1);
            for (int t = 0; t + 1 < T; ++t) lag1[t] = {t, t + 1};
            for (int s = 0; s < S; ++s) tp.add(pearson(g, s, g, s, lag1));
        }
        w[si].temporal = {coupling * tp.value(), 0.0};

        // Spatial-scale: each child's series against its parent's.
        PositiveMean sc_sp;
        if (lat.has_spatial_parent(sc.l)) {
            const ScaleGrid& up = obs.grid(lat.scale_index({sc.l + 1, sc.m}));
            for (int s = 0; s < S; ++s)
                sc_sp.add(pearson(g, s, up, lat.parent_spatial(sc.l, s), same_t));
        }
        w[si].spatial_scale = {coupling * sc_sp.value(), 0.0};

        // Temporal-scale: child series against the parent series sampled at
        // the coarse step covering each fine step.
        PositiveMean sc_tp;
        if (lat.has_temporal_parent(sc.m)) {
            const ScaleGrid& up = obs.grid(lat.scale_index({sc.l, sc.m + 1}));
            std::vector<std::pair<int, int>> t_map(T);
            for (int t = 0; t < T; ++t) t_map[t] = {t, lat.parent_temporal(sc.m, t)};
            for (int s = 0; s < S; ++s) sc_tp.add(pearson(g, s, up, s, t_map));
        }
        w[si].temporal_scale = {coupling * sc_tp.value(), 0.0};
    }
    return w;
}

std::vector<int> canonicalize_states(ScaleEmissions& em, StateGrid* z) {
    const int k = em.k_states;
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        return em.pooled_mean(i) > em.pooled_mean(j);
    });

    // perm[old] = new 0-based label. Highest mean becomes state 1; the
    // lowest becomes state 2; for K=3 the middle one is the normal state 3.
    std::vector<int> perm(k);
    if (k >= 2) {
        perm[order.front()] = 0;
        perm[order.back()] = 1;
        for (int r = 1; r + 1 < k; ++r) perm[order[r]] = r + 1;
    } else if (k == 1) {
        perm[0] = 0;
    }

    bool identity = true;
    for (int i = 0; i < k; ++i)
        if (perm[i] != i) identity = false;
    if (identity) return perm;

    ScaleEmissions rein = em;
    for (int s = 0; s < em.locations; ++s) {
        for (int g = 0; g < em.groups; ++g) {
            for (int i = 0; i < k; ++i) {
                const size_t from = em.idx(s, g, i);
                const size_t to = em.idx(s, g, perm[i]);
                rein.a[to] = em.a[from];
                rein.b[to] = em.b[from];
                rein.zero_mass[to] = em.zero_mass[from];
            }
        }
    }
    em = std::move(rein);
    if (z)
        for (auto& label : z->z)
            if (label >= 1) label = perm[label - 1] + 1;
    return perm;
}

namespace {

nlohmann::json class_weights_json(const ClassWeights& c) {
    return {{"high", c.high}, {"low", c.low}};
}

ClassWeights class_weights_from(const nlohmann::json& j) {
    ClassWeights c{j.at("high").get<double>(), j.at("low").get<double>()};
    if (!std::isfinite(c.high) || !std::isfinite(c.low) || c.high < c.low)
        throw ConfigError("edge weights must be finite with high >= low");
    return c;
}

}  // namespace

nlohmann::json model_params_to_json(const ModelParams& p) {
    nlohmann::json j;
    j["states_per_scale"] = p.states_per_scale;
    j["edge_weights"] = nlohmann::json::array();
    for (const auto& sw : p.edge_weights) {
        nlohmann::json e = {{"spatial", class_weights_json(sw.spatial)},
                            {"temporal", class_weights_json(sw.temporal)},
                            {"spatial_scale", class_weights_json(sw.spatial_scale)},
                            {"temporal_scale", class_weights_json(sw.temporal_scale)}};
        if (!sw.spatial_pair.empty()) {
            nlohmann::json ov = nlohmann::json::array();
            for (const auto& [key, cw] : sw.spatial_pair)
                ov.push_back({key.first, key.second, cw.high, cw.low});
            e["spatial_pair_overrides"] = ov;
        }
        j["edge_weights"].push_back(std::move(e));
    }
    j["emissions"] = nlohmann::json::array();
    for (const auto& em : p.emissions) {
        j["emissions"].push_back(
            {{"family", em.family == EmissionFamily::Gaussian ? "gaussian" : "gamma"},
             {"locations", em.locations},
             {"groups", em.groups},
             {"states", em.k_states},
             {"a", em.a},
             {"b", em.b},
             {"zero_mass", em.zero_mass}});
    }
    return j;
}

ModelParams model_params_from_json(const nlohmann::json& j) {
    ModelParams p;
    p.states_per_scale = j.at("states_per_scale").get<std::vector<int>>();
    for (const auto& e : j.at("edge_weights")) {
        ScaleWeights sw;
        sw.spatial = class_weights_from(e.at("spatial"));
        sw.temporal = class_weights_from(e.at("temporal"));
        sw.spatial_scale = class_weights_from(e.at("spatial_scale"));
        sw.temporal_scale = class_weights_from(e.at("temporal_scale"));
        if (e.contains("spatial_pair_overrides")) {
            for (const auto& ov : e.at("spatial_pair_overrides")) {
                const int s1 = ov.at(0).get<int>(), s2 = ov.at(1).get<int>();
                sw.spatial_pair[{std::min(s1, s2), std::max(s1, s2)}] = {ov.at(2).get<double>(),
                                                                         ov.at(3).get<double>()};
            }
        }
        p.edge_weights.push_back(std::move(sw));
    }
    for (const auto& e : j.at("emissions")) {
        ScaleEmissions em;
        const std::string fam = e.at("family").get<std::string>();
        if (fam == "gaussian")
            em.family = EmissionFamily::Gaussian;
        else if (fam == "gamma")
            em.family = EmissionFamily::Gamma;
        else
            throw ConfigError("unknown emission family: " + fam);
        em.locations = e.at("locations").get<int>();
        em.groups = e.at("groups").get<int>();
        em.k_states = e.at("states").get<int>();
        em.a = e.at("a").get<std::vector<double>>();
        em.b = e.at("b").get<std::vector<double>>();
        em.zero_mass = e.at("zero_mass").get<std::vector<double>>();
        const size_t n = static_cast<size_t>(em.locations) * em.groups * em.k_states;
        if (em.a.size() != n || em.b.size() != n || em.zero_mass.size() != n)
            throw ShapeError("emission parameter arrays have wrong length");
        p.emissions.push_back(std::move(em));
    }
    if (p.edge_weights.size() != p.states_per_scale.size() ||
        p.emissions.size() != p.states_per_scale.size())
        throw ShapeError("model params must cover every scale");
    return p;
}

}  // namespace msmrf
