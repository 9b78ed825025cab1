#include "msmrf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <thread>

#include "msmrf/errors.hpp"

namespace msmrf {

namespace {

constexpr int kMaxStates = 8;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kSdFloor = 1e-6;

double log_sum_exp(const double* v, int n) {
    double mx = kNegInf;
    for (int i = 0; i < n; ++i) mx = std::max(mx, v[i]);
    if (mx == kNegInf) return kNegInf;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(v[i] - mx);
    return mx + std::log(s);
}

// Adds the (high - low) gap of every incident pairwise edge to the logit of
// the neighbor's state. Constant (low) terms cancel under normalization and
// are dropped.
void add_edge_terms(const MultiScaleLattice& lat, const ModelParams& params,
                    const StateFieldSet& z, ScaleId sc, int s, int t, double* logits,
                    bool scale_edges) {
    const int si = lat.scale_index(sc);
    const ScaleWeights& w = params.edge_weights[si];
    const StateGrid& zg = z.grid(si);

    const double tgap = w.temporal.high - w.temporal.low;
    if (t > 0) {
        const int k2 = zg.at(s, t - 1);
        if (k2 >= 1) logits[k2 - 1] += tgap;
    }
    if (t + 1 < zg.times) {
        const int k2 = zg.at(s, t + 1);
        if (k2 >= 1) logits[k2 - 1] += tgap;
    }

    for (int s2 : lat.neighbors(sc.l, s)) {
        const int k2 = zg.at(s2, t);
        if (k2 >= 1) {
            const ClassWeights& cw = w.spatial_for(s, s2);
            logits[k2 - 1] += cw.high - cw.low;
        }
    }

    if (!scale_edges) return;

    if (lat.has_spatial_parent(sc.l)) {
        const StateGrid& zp = z.grid(lat.scale_index({sc.l + 1, sc.m}));
        const int k2 = zp.at(lat.parent_spatial(sc.l, s), t);
        if (k2 >= 1) logits[k2 - 1] += w.spatial_scale.high - w.spatial_scale.low;
    }
    if (sc.l > 0) {
        const int ci = lat.scale_index({sc.l - 1, sc.m});
        const double gap = params.edge_weights[ci].spatial_scale.high -
                           params.edge_weights[ci].spatial_scale.low;
        const StateGrid& zc = z.grid(ci);
        for (int s2 : lat.children_spatial(sc.l, s)) {
            const int k2 = zc.at(s2, t);
            if (k2 >= 1) logits[k2 - 1] += gap;
        }
    }
    if (lat.has_temporal_parent(sc.m)) {
        const StateGrid& zp = z.grid(lat.scale_index({sc.l, sc.m + 1}));
        const int k2 = zp.at(s, lat.parent_temporal(sc.m, t));
        if (k2 >= 1) logits[k2 - 1] += w.temporal_scale.high - w.temporal_scale.low;
    }
    if (sc.m > 0) {
        const int ci = lat.scale_index({sc.l, sc.m - 1});
        const double gap = params.edge_weights[ci].temporal_scale.high -
                           params.edge_weights[ci].temporal_scale.low;
        const StateGrid& zc = z.grid(ci);
        for (int t2 : lat.children_temporal(sc.m, t)) {
            const int k2 = zc.at(s, t2);
            if (k2 >= 1) logits[k2 - 1] += gap;
        }
    }
}

// Dense per-cell emission log-densities, rebuilt only after refits so the
// sweep hot loop does no pdf math.
struct EmissionTable {
    std::vector<std::vector<double>> emit;  // [si][(s*T+t)*K + k]
    std::vector<std::vector<double>> logx;  // cached log(x) per cell, gamma scales

    void init(const ObservationSet& obs, const MultiScaleLattice& lat, const ModelParams& p) {
        emit.assign(lat.num_scales(), {});
        logx.assign(lat.num_scales(), {});
        for (int si = 0; si < lat.num_scales(); ++si) {
            if (p.emissions[si].family != EmissionFamily::Gamma) continue;
            const ScaleGrid& x = obs.grid(si);
            logx[si].assign(x.value.size(), 0.0);
            for (size_t i = 0; i < x.value.size(); ++i) {
                if (x.miss[i]) continue;
                if (x.value[i] < 0.0)
                    throw DomainError("negative observation under gamma emissions");
                if (x.value[i] > 0.0) logx[si][i] = std::log(x.value[i]);
            }
        }
        for (int si = 0; si < lat.num_scales(); ++si) rebuild(si, obs, lat, p);
    }

    void rebuild(int si, const ObservationSet& obs, const MultiScaleLattice& lat,
                 const ModelParams& p) {
        const ScaleGrid& x = obs.grid(si);
        const ScaleEmissions& em = p.emissions[si];
        const ScaleId sc = lat.scale_at(si);
        const int K = em.k_states;
        emit[si].assign(x.value.size() * K, 0.0);

        const size_t ngk = em.a.size();
        std::vector<double> cst(ngk), zcst;
        if (em.family == EmissionFamily::Gaussian) {
            for (size_t i = 0; i < ngk; ++i) {
                if (em.b[i] <= 0.0) throw ParameterError("gaussian stddev must be positive");
                cst[i] = -std::log(em.b[i]) - 0.5 * kLog2Pi;
            }
        } else {
            zcst.resize(ngk);
            for (size_t i = 0; i < ngk; ++i) {
                if (em.a[i] <= 0.0 || em.b[i] <= 0.0)
                    throw ParameterError("gamma shape/rate must be positive");
                const double pi0 = em.zero_mass[i];
                zcst[i] = std::log(pi0);
                cst[i] = (pi0 < 1.0 ? std::log1p(-pi0) : kNegInf) +
                         em.a[i] * std::log(em.b[i]) - std::lgamma(em.a[i]);
            }
        }

        for (int s = 0; s < x.locations; ++s) {
            for (int t = 0; t < x.times; ++t) {
                const size_t ci = x.idx(s, t);
                if (x.miss[ci]) continue;
                const double v = x.value[ci];
                const size_t gi = em.idx(s, lat.calendar_of(sc.m, t), 0);
                double* out = emit[si].data() + ci * K;
                if (em.family == EmissionFamily::Gaussian) {
                    for (int k = 0; k < K; ++k) {
                        const double u = (v - em.a[gi + k]) / em.b[gi + k];
                        out[k] = cst[gi + k] - 0.5 * u * u;
                    }
                } else if (v == 0.0) {
                    for (int k = 0; k < K; ++k) out[k] = zcst[gi + k];
                } else {
                    const double lx = logx[si][ci];
                    for (int k = 0; k < K; ++k)
                        out[k] = cst[gi + k] + (em.a[gi + k] - 1.0) * lx - em.b[gi + k] * v;
                }
            }
        }
    }
};

void sweep_once(StateFieldSet& z, const MultiScaleLattice& lat, const ModelParams& params,
                const EmissionTable& tab, Rng& rng, bool scale_edges) {
    double logits[kMaxStates];
    double wgt[kMaxStates];
    for (int si = 0; si < lat.num_scales(); ++si) {
        const ScaleId sc = lat.scale_at(si);
        StateGrid& zg = z.scales[si];
        const int K = params.k_at(si);
        const double* e = tab.emit[si].data();
        for (int s = 0; s < zg.locations; ++s) {
            for (int t = 0; t < zg.times; ++t) {
                const size_t ci = zg.idx(s, t);
                if (zg.z[ci] == 0) continue;
                std::memcpy(logits, e + ci * K, sizeof(double) * K);
                add_edge_terms(lat, params, z, sc, s, t, logits, scale_edges);
                double mx = logits[0];
                for (int k = 1; k < K; ++k) mx = std::max(mx, logits[k]);
                if (mx == kNegInf) {
                    for (int k = 0; k < K; ++k) wgt[k] = 1.0;
                } else {
                    for (int k = 0; k < K; ++k) wgt[k] = std::exp(logits[k] - mx);
                }
                zg.z[ci] = rng.categorical(wgt, K) + 1;
            }
        }
    }
}

void check_states(const ModelParams& params, const MultiScaleLattice& lat) {
    if (static_cast<int>(params.states_per_scale.size()) != lat.num_scales() ||
        static_cast<int>(params.emissions.size()) != lat.num_scales() ||
        static_cast<int>(params.edge_weights.size()) != lat.num_scales())
        throw ShapeError("model params must cover every lattice scale");
    for (int k : params.states_per_scale)
        if (k < 1 || k > kMaxStates) throw ConfigError("states per scale must be in 1..8");
}

}  // namespace

void GibbsConfig::check() const {
    if (burn_in < 0 || samples < 1 || thin < 1 || refit_every < 0 || chains < 1)
        throw ConfigError("invalid gibbs config: need burn_in >= 0, samples >= 1, thin >= 1");
    if (init == InitMode::Provided && provided == nullptr)
        throw ConfigError("init mode 'provided' requires a state field");
}

std::vector<double> local_conditional(ScaleId scale, int s, int t, const StateFieldSet& z,
                                      const ObservationSet& obs, const MultiScaleLattice& lat,
                                      const ModelParams& params, bool include_scale_edges) {
    const int si = lat.scale_index(scale);
    const int K = params.k_at(si);
    const ScaleGrid& x = obs.grid(si);
    if (x.is_missing(s, t)) throw DomainError("conditional requested for a missing cell");

    double logits[kMaxStates];
    for (int k = 0; k < K; ++k)
        logits[k] = data_log_potential(k + 1, x.at(s, t), s, t, scale, params, lat);
    add_edge_terms(lat, params, z, scale, s, t, logits, include_scale_edges);

    const double lse = log_sum_exp(logits, K);
    std::vector<double> prob(K);
    if (lse == kNegInf) {
        std::fill(prob.begin(), prob.end(), 1.0 / K);
    } else {
        for (int k = 0; k < K; ++k) prob[k] = std::exp(logits[k] - lse);
    }
    return prob;
}

void gibbs_sweep(StateFieldSet& z, const ObservationSet& obs, const MultiScaleLattice& lat,
                 const ModelParams& params, Rng& rng, bool include_scale_edges) {
    check_states(params, lat);
    EmissionTable tab;
    tab.init(obs, lat, params);
    sweep_once(z, lat, params, tab, rng, include_scale_edges);
}

double joint_log_likelihood(const StateFieldSet& z, const ObservationSet& obs,
                            const MultiScaleLattice& lat, const ModelParams& params,
                            bool include_scale_edges) {
    double ll = 0.0;
    for (int si = 0; si < lat.num_scales(); ++si) {
        const ScaleId sc = lat.scale_at(si);
        const StateGrid& zg = z.grid(si);
        const ScaleGrid& xg = obs.grid(si);
        const ScaleWeights& w = params.edge_weights[si];
        for (int s = 0; s < zg.locations; ++s) {
            for (int t = 0; t < zg.times; ++t) {
                const int k = zg.at(s, t);
                if (k == 0 || xg.is_missing(s, t)) continue;
                ll += data_log_potential(k, xg.at(s, t), s, t, sc, params, lat);
                if (t + 1 < zg.times) {
                    const int k2 = zg.at(s, t + 1);
                    if (k2 >= 1) ll += k == k2 ? w.temporal.high : w.temporal.low;
                }
                for (int s2 : lat.neighbors(sc.l, s)) {
                    if (s2 <= s) continue;
                    const int k2 = zg.at(s2, t);
                    if (k2 >= 1) {
                        const ClassWeights& cw = w.spatial_for(s, s2);
                        ll += k == k2 ? cw.high : cw.low;
                    }
                }
                if (!include_scale_edges) continue;
                if (lat.has_spatial_parent(sc.l)) {
                    const StateGrid& zp = z.grid(lat.scale_index({sc.l + 1, sc.m}));
                    const int k2 = zp.at(lat.parent_spatial(sc.l, s), t);
                    if (k2 >= 1) ll += k == k2 ? w.spatial_scale.high : w.spatial_scale.low;
                }
                if (lat.has_temporal_parent(sc.m)) {
                    const StateGrid& zp = z.grid(lat.scale_index({sc.l, sc.m + 1}));
                    const int k2 = zp.at(s, lat.parent_temporal(sc.m, t));
                    if (k2 >= 1) ll += k == k2 ? w.temporal_scale.high : w.temporal_scale.low;
                }
            }
        }
    }
    return ll;
}

std::vector<std::vector<double>> exact_marginals(const ObservationSet& obs,
                                                 const MultiScaleLattice& lat,
                                                 const ModelParams& params) {
    check_states(params, lat);
    struct Cell {
        int si, s, t, k;
    };
    std::vector<Cell> cells;
    double log2_total = 0.0;
    for (int si = 0; si < lat.num_scales(); ++si) {
        const ScaleGrid& xg = obs.grid(si);
        const int K = params.k_at(si);
        for (int s = 0; s < xg.locations; ++s)
            for (int t = 0; t < xg.times; ++t)
                if (!xg.is_missing(s, t)) {
                    cells.push_back({si, s, t, K});
                    log2_total += std::log2(static_cast<double>(K));
                }
    }
    if (log2_total > 20.0 + 1e-9)
        throw SizeError("state space exceeds 2^20 joint configurations");

    size_t nconf = 1;
    for (const Cell& c : cells) nconf *= static_cast<size_t>(c.k);

    StateFieldSet z = make_state_fields(lat, obs);
    std::vector<int> conf(cells.size(), 0);
    auto apply_conf = [&] {
        for (size_t i = 0; i < cells.size(); ++i)
            z.scales[cells[i].si].set(cells[i].s, cells[i].t, conf[i] + 1);
    };
    auto advance = [&] {
        for (size_t i = 0; i < conf.size(); ++i) {
            if (++conf[i] < cells[i].k) return;
            conf[i] = 0;
        }
    };

    std::vector<double> ll(nconf);
    for (size_t idx = 0; idx < nconf; ++idx, advance()) {
        apply_conf();
        ll[idx] = joint_log_likelihood(z, obs, lat, params);
    }
    const double log_z = log_sum_exp(ll.data(), static_cast<int>(nconf));

    std::vector<std::vector<double>> marg(lat.num_scales());
    for (int si = 0; si < lat.num_scales(); ++si)
        marg[si].assign(obs.grid(si).value.size() * params.k_at(si), 0.0);

    std::fill(conf.begin(), conf.end(), 0);
    for (size_t idx = 0; idx < nconf; ++idx, advance()) {
        const double wgt = std::exp(ll[idx] - log_z);
        for (size_t i = 0; i < cells.size(); ++i) {
            const Cell& c = cells[i];
            marg[c.si][(obs.grid(c.si).idx(c.s, c.t)) * c.k + conf[i]] += wgt;
        }
    }
    return marg;
}

// ---------------------------------------------------------------------------
// Mixture-model initialization
// ---------------------------------------------------------------------------

namespace {

struct EmCell {
    int s, t, gid;
    double x;
};

struct GroupRaw {
    double sum = 0.0, sumsq = 0.0;
    int n = 0, zeros = 0;
    std::vector<double> values;

    double mean() const { return n ? sum / n : 0.0; }
    double sd() const {
        if (n < 2) return 0.0;
        const double v = (sumsq - sum * sum / n) / (n - 1);
        return v > 0.0 ? std::sqrt(v) : 0.0;
    }
    double zero_frac() const { return n ? static_cast<double>(zeros) / n : 0.0; }
};

class MixtureEm {
public:
    MixtureEm(const ScaleGrid& x, ScaleId sc, int k_states, EmissionFamily family,
              const MultiScaleLattice& lat, Rng& rng)
        : x_(x), sc_(sc), family_(family), lat_(lat), rng_(rng) {
        em_.family = family;
        em_.locations = x.locations;
        em_.groups = lat.calendar_groups(sc.m);
        em_.k_states = k_states;
        em_.resize();
        raw_.resize(static_cast<size_t>(em_.locations) * em_.groups);
        for (int s = 0; s < x.locations; ++s) {
            for (int t = 0; t < x.times; ++t) {
                if (x.is_missing(s, t)) continue;
                const double v = x.at(s, t);
                if (family == EmissionFamily::Gamma && v < 0.0)
                    throw DomainError("negative observation under gamma emissions");
                const int gid = s * em_.groups + lat.calendar_of(sc.m, t);
                cells_.push_back({s, t, gid, v});
                auto& g = raw_[gid];
                g.sum += v;
                g.sumsq += v * v;
                ++g.n;
                if (v == 0.0) ++g.zeros;
                g.values.push_back(v);
            }
        }
        weights_.assign(k_states, 1.0 / k_states);
    }

    // Runs EM to convergence, restarting collapsed or duplicated components
    // from random data points, at most 5 restarts.
    void fit() {
        const int K = em_.k_states;
        init_components();
        int restarts = 0;
        for (;;) {
            const int collapsed = run_iterations();
            int offender = collapsed;
            if (offender < 0) offender = duplicate_component();
            if (offender < 0) return;
            if (++restarts > 5)
                throw EstimationError("mixture component collapsed after 5 restarts");
            reinit_component(offender);
            std::fill(weights_.begin(), weights_.end(), 1.0 / K);
        }
    }

    // Most likely component per cell, 1-based; canonical label order.
    void assign(StateGrid& zg) {
        const int K = em_.k_states;
        double le[kMaxStates];
        for (const EmCell& c : cells_) {
            for (int k = 0; k < K; ++k) le[k] = std::log(weights_[k]) + logpdf(c, k);
            int best = 0;
            for (int k = 1; k < K; ++k)
                if (le[k] > le[best]) best = k;
            zg.set(c.s, c.t, best + 1);
        }
        canonicalize_states(em_, &zg);
    }

    const ScaleEmissions& emissions() const { return em_; }

private:
    double logpdf(const EmCell& c, int k) const {
        const size_t i = em_.idx(c.s, c.gid % em_.groups, k);
        if (family_ == EmissionFamily::Gaussian) {
            const double u = (c.x - em_.a[i]) / em_.b[i];
            return -std::log(em_.b[i]) - 0.5 * (kLog2Pi + u * u);
        }
        const double pi0 = em_.zero_mass[i];
        if (c.x == 0.0) return pi0 > 0.0 ? std::log(pi0) : kNegInf;
        const double tail = pi0 < 1.0 ? std::log1p(-pi0) : kNegInf;
        return tail + em_.a[i] * std::log(em_.b[i]) + (em_.a[i] - 1.0) * std::log(c.x) -
               em_.b[i] * c.x - std::lgamma(em_.a[i]);
    }

    void set_gaussian(size_t i, double mean, double sd) {
        em_.a[i] = mean;
        em_.b[i] = std::max(sd, kSdFloor);
    }

    void set_gamma(size_t i, double mean, double var, double pi0) {
        const double m = mean > 0.0 ? mean : 1.0;
        const double v = std::max(var, 1e-12 * std::max(1.0, m * m));
        em_.a[i] = std::clamp(m * m / v, 1e-3, 1e6);
        em_.b[i] = em_.a[i] / m;
        em_.zero_mass[i] = std::clamp(pi0, 0.0, 1.0 - 1e-9);
    }

    void init_components() {
        const int K = em_.k_states;
        // Component k starts displaced from the group mean; displacement
        // order matches the canonical state order (high, low, middle).
        static const double goff2[2] = {1.0, -1.0};
        static const double goff3[3] = {2.0, -2.0, 0.0};
        static const double gfac2[2] = {1.5, 0.5};
        static const double gfac3[3] = {1.8, 0.4, 1.0};
        for (int s = 0; s < em_.locations; ++s) {
            for (int g = 0; g < em_.groups; ++g) {
                const GroupRaw& r = raw_[static_cast<size_t>(s) * em_.groups + g];
                const double gm = r.mean(), gsd = r.sd();
                for (int k = 0; k < K; ++k) {
                    const size_t i = em_.idx(s, g, k);
                    if (family_ == EmissionFamily::Gaussian) {
                        const double off = K == 2 ? goff2[k] : (K >= 3 ? goff3[std::min(k, 2)] : 0.0);
                        set_gaussian(i, gm + off * gsd, gsd);
                    } else {
                        const double fac = K == 2 ? gfac2[k] : (K >= 3 ? gfac3[std::min(k, 2)] : 1.0);
                        set_gamma(i, gm * fac, std::max(gsd * gsd, 1e-12), r.zero_frac());
                    }
                }
            }
        }
    }

    void reinit_component(int k) {
        for (int s = 0; s < em_.locations; ++s) {
            for (int g = 0; g < em_.groups; ++g) {
                const GroupRaw& r = raw_[static_cast<size_t>(s) * em_.groups + g];
                if (r.values.empty()) continue;
                const double pick = r.values[rng_.uniform_int(static_cast<int>(r.values.size()))];
                const size_t i = em_.idx(s, g, k);
                if (family_ == EmissionFamily::Gaussian)
                    set_gaussian(i, pick, r.sd());
                else
                    set_gamma(i, pick > 0.0 ? pick : r.mean(), std::max(r.sd() * r.sd(), 1e-12),
                              r.zero_frac());
            }
        }
    }

    // Returns the index of a collapsed component, or -1 after convergence.
    int run_iterations() {
        const int K = em_.k_states;
        const size_t ng = raw_.size();
        std::vector<double> wsum(ng * K), wx(ng * K), wxx(ng * K), wz(ng * K), pw(ng * K),
            pwx(ng * K), pwxx(ng * K);
        double prev_ll = kNegInf;
        double le[kMaxStates];
        for (int iter = 0; iter < 50; ++iter) {
            std::fill(wsum.begin(), wsum.end(), 0.0);
            std::fill(wx.begin(), wx.end(), 0.0);
            std::fill(wxx.begin(), wxx.end(), 0.0);
            std::fill(wz.begin(), wz.end(), 0.0);
            std::fill(pw.begin(), pw.end(), 0.0);
            std::fill(pwx.begin(), pwx.end(), 0.0);
            std::fill(pwxx.begin(), pwxx.end(), 0.0);
            std::vector<double> comp(K, 0.0);
            double ll = 0.0;

            for (const EmCell& c : cells_) {
                for (int k = 0; k < K; ++k) le[k] = std::log(weights_[k]) + logpdf(c, k);
                const double lse = log_sum_exp(le, K);
                ll += lse;
                for (int k = 0; k < K; ++k) {
                    const double r = lse == kNegInf ? 1.0 / K : std::exp(le[k] - lse);
                    const size_t i = static_cast<size_t>(c.gid) * K + k;
                    wsum[i] += r;
                    wx[i] += r * c.x;
                    wxx[i] += r * c.x * c.x;
                    comp[k] += r;
                    if (c.x == 0.0) {
                        wz[i] += r;
                    } else {
                        pw[i] += r;
                        pwx[i] += r * c.x;
                        pwxx[i] += r * c.x * c.x;
                    }
                }
            }

            for (size_t gid = 0; gid < ng; ++gid) {
                for (int k = 0; k < K; ++k) {
                    const size_t i = gid * K + k;
                    if (wsum[i] < 1e-9) continue;  // keep previous params
                    const size_t pi =
                        em_.idx(static_cast<int>(gid) / em_.groups,
                                static_cast<int>(gid) % em_.groups, k);
                    if (family_ == EmissionFamily::Gaussian) {
                        const double mean = wx[i] / wsum[i];
                        const double var = wxx[i] / wsum[i] - mean * mean;
                        set_gaussian(pi, mean, var > 0.0 ? std::sqrt(var) : 0.0);
                    } else {
                        const double pi0 = wz[i] / wsum[i];
                        if (pw[i] < 1e-9) {
                            em_.zero_mass[pi] = std::clamp(pi0, 0.0, 1.0 - 1e-9);
                            continue;
                        }
                        const double mean = pwx[i] / pw[i];
                        const double var = pwxx[i] / pw[i] - mean * mean;
                        set_gamma(pi, mean, var, pi0);
                    }
                }
            }

            const double total = static_cast<double>(cells_.size());
            for (int k = 0; k < K; ++k) {
                weights_[k] = comp[k] / total;
                if (weights_[k] < 1e-8) return k;
            }
            if (iter > 0 && ll - prev_ll < 1e-6) break;
            prev_ll = ll;
        }
        return -1;
    }

    // Two components with identical parameters everywhere mean the mixture
    // has effectively collapsed; returns the higher label or -1.
    int duplicate_component() const {
        const int K = em_.k_states;
        for (int i = 0; i < K; ++i) {
            for (int j = i + 1; j < K; ++j) {
                double diff = 0.0;
                for (int s = 0; s < em_.locations; ++s) {
                    for (int g = 0; g < em_.groups; ++g) {
                        const size_t a = em_.idx(s, g, i), b = em_.idx(s, g, j);
                        diff = std::max(diff, std::abs(em_.a[a] - em_.a[b]));
                        diff = std::max(diff, std::abs(em_.b[a] - em_.b[b]));
                        diff = std::max(diff, std::abs(em_.zero_mass[a] - em_.zero_mass[b]));
                    }
                }
                if (diff < 1e-9) return j;
            }
        }
        return -1;
    }

    const ScaleGrid& x_;
    ScaleId sc_;
    EmissionFamily family_;
    const MultiScaleLattice& lat_;
    Rng& rng_;
    ScaleEmissions em_;
    std::vector<EmCell> cells_;
    std::vector<GroupRaw> raw_;
    std::vector<double> weights_;
};

}  // namespace

StateFieldSet initialize_states(const ObservationSet& obs, const MultiScaleLattice& lat,
                                const ModelParams& params, const GibbsConfig& cfg) {
    check_states(params, lat);
    StateFieldSet z = make_state_fields(lat, obs);
    for (int si = 0; si < lat.num_scales(); ++si) {
        const ScaleId sc = lat.scale_at(si);
        const ScaleGrid& x = obs.grid(si);
        const int K = params.k_at(si);
        StateGrid& zg = z.scales[si];
        if (K == 1) {
            for (int s = 0; s < x.locations; ++s)
                for (int t = 0; t < x.times; ++t)
                    if (!x.is_missing(s, t)) zg.set(s, t, 1);
            continue;
        }
        Rng rng(derive_seed(cfg.seed, 0x454d00u + si));
        MixtureEm em(x, sc, K, params.emissions[si].family, lat, rng);
        em.fit();
        em.assign(zg);
    }
    return z;
}

// ---------------------------------------------------------------------------
// Chain driver
// ---------------------------------------------------------------------------

namespace {

struct ChainOut {
    std::vector<std::vector<std::uint32_t>> counts;  // [si][(s*T+t)*K + k]
    std::vector<StateFieldSet> snaps;
};

void refit_all(ModelParams& p, StateFieldSet& z, const ObservationSet& obs,
               const MultiScaleLattice& lat) {
    for (int si = 0; si < lat.num_scales(); ++si) {
        const ScaleId sc = lat.scale_at(si);
        try {
            p.emissions[si] = estimate_emissions(obs, z.grid(si), sc, p.emissions[si].family,
                                                 p.k_at(si), lat);
            canonicalize_states(p.emissions[si], &z.scales[si]);
        } catch (const EstimationError&) {
            // A state emptied out at some calendar group mid-run; keep the
            // previous estimates for this scale and continue sampling.
        }
    }
}

ChainOut run_chain(const ObservationSet& obs, const MultiScaleLattice& lat,
                   const ModelParams& params, const GibbsConfig& cfg, std::uint64_t seed) {
    ModelParams p = params;
    GibbsConfig local = cfg;
    local.seed = seed;

    Rng rng(derive_seed(seed, 0x5357u));
    StateFieldSet z;
    switch (cfg.init) {
        case InitMode::Mixture:
            z = initialize_states(obs, lat, p, local);
            break;
        case InitMode::UniformRandom: {
            z = make_state_fields(lat, obs);
            for (int si = 0; si < lat.num_scales(); ++si) {
                const ScaleGrid& x = obs.grid(si);
                const int K = p.k_at(si);
                for (int s = 0; s < x.locations; ++s)
                    for (int t = 0; t < x.times; ++t)
                        if (!x.is_missing(s, t)) z.scales[si].set(s, t, 1 + rng.uniform_int(K));
            }
            break;
        }
        case InitMode::Provided: {
            z = *cfg.provided;
            if (static_cast<int>(z.scales.size()) != lat.num_scales())
                throw ShapeError("provided init does not cover every scale");
            for (int si = 0; si < lat.num_scales(); ++si) {
                const ScaleGrid& x = obs.grid(si);
                StateGrid& zg = z.scales[si];
                if (zg.locations != x.locations || zg.times != x.times)
                    throw ShapeError("provided init has wrong grid shape");
                for (int s = 0; s < x.locations; ++s)
                    for (int t = 0; t < x.times; ++t) {
                        if (x.is_missing(s, t)) {
                            zg.set(s, t, 0);
                        } else {
                            const int k = zg.at(s, t);
                            if (k < 1 || k > p.k_at(si))
                                throw DomainError("provided init label out of range");
                        }
                    }
            }
            break;
        }
    }

    if (cfg.refit_every > 0) refit_all(p, z, obs, lat);

    EmissionTable tab;
    tab.init(obs, lat, p);

    ChainOut out;
    out.counts.resize(lat.num_scales());
    for (int si = 0; si < lat.num_scales(); ++si)
        out.counts[si].assign(obs.grid(si).value.size() * p.k_at(si), 0);

    int sweeps = 0;
    auto step = [&] {
        sweep_once(z, lat, p, tab, rng, cfg.include_scale_edges);
        ++sweeps;
        if (cfg.refit_every > 0 && sweeps % cfg.refit_every == 0) {
            refit_all(p, z, obs, lat);
            for (int si = 0; si < lat.num_scales(); ++si) tab.rebuild(si, obs, lat, p);
        }
    };

    for (int i = 0; i < cfg.burn_in; ++i) step();
    for (int n = 0; n < cfg.samples; ++n) {
        for (int j = 0; j < cfg.thin; ++j) step();
        for (int si = 0; si < lat.num_scales(); ++si) {
            const StateGrid& zg = z.grid(si);
            const int K = p.k_at(si);
            auto& cnt = out.counts[si];
            for (size_t ci = 0; ci < zg.z.size(); ++ci)
                if (zg.z[ci] >= 1) ++cnt[ci * K + zg.z[ci] - 1];
        }
        if (cfg.keep_snapshots) out.snaps.push_back(z);
    }
    return out;
}

}  // namespace

PosteriorSummary run_inference(const ObservationSet& obs, const MultiScaleLattice& lat,
                               const ModelParams& params, const GibbsConfig& cfg) {
    cfg.check();
    check_states(params, lat);

    std::vector<ChainOut> parts(cfg.chains);
    if (cfg.chains == 1) {
        parts[0] = run_chain(obs, lat, params, cfg, cfg.seed);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr err;
        std::mutex err_mx;
        for (int c = 0; c < cfg.chains; ++c) {
            pool.emplace_back([&, c] {
                try {
                    parts[c] = run_chain(obs, lat, params, cfg, derive_seed(cfg.seed, c));
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mx);
                    if (!err) err = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        if (err) std::rethrow_exception(err);
    }

    PosteriorSummary out;
    out.n_samples = cfg.samples * cfg.chains;
    out.map_states = make_state_fields(lat, obs);
    out.marginals.resize(lat.num_scales());
    for (int si = 0; si < lat.num_scales(); ++si) {
        const int K = params.k_at(si);
        const ScaleGrid& xg = obs.grid(si);
        auto& marg = out.marginals[si];
        marg.assign(xg.value.size() * K, 0.0);
        StateGrid& map = out.map_states.scales[si];
        for (size_t ci = 0; ci < xg.value.size(); ++ci) {
            if (xg.miss[ci]) continue;
            std::uint64_t tot = 0;
            for (int k = 0; k < K; ++k) {
                std::uint64_t c = 0;
                for (const auto& part : parts) c += part.counts[si][ci * K + k];
                marg[ci * K + k] = static_cast<double>(c);
                tot += c;
            }
            int best = 0;
            for (int k = 0; k < K; ++k) {
                marg[ci * K + k] /= static_cast<double>(tot);
                if (marg[ci * K + k] > marg[ci * K + best]) best = k;
            }
            map.z[ci] = best + 1;
        }
    }
    for (auto& part : parts)
        for (auto& s : part.snaps) out.snapshots.push_back(std::move(s));
    return out;
}

}  // namespace msmrf
