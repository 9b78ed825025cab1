#include <cmath>

#include "doctest.h"
#include "msmrf/errors.hpp"
#include "msmrf/model.hpp"
#include "msmrf/rng.hpp"
#include "test_support.hpp"

using namespace msmrf;
using nlohmann::json;

namespace {

MultiScaleLattice one_cell_lattice(int months = 1) {
    json cfg;
    cfg["spatial_scales"] = json::array({json{{"size", 1}}});
    cfg["temporal_scales"] = {{{"size", months}}};
    cfg["months_per_year"] = 1;
    return MultiScaleLattice::build(cfg);
}

ModelParams one_cell_params(const MultiScaleLattice& lat, EmissionFamily family,
                            std::vector<double> a, std::vector<double> b,
                            std::vector<double> zero_mass = {}) {
    ModelParams p;
    const int k = static_cast<int>(a.size());
    p.states_per_scale = {k};
    p.edge_weights = testutil::uniform_weights(lat, 0.0, 0.0);
    ScaleEmissions em;
    em.family = family;
    em.locations = 1;
    em.groups = 1;
    em.k_states = k;
    em.resize();
    em.a = a;
    em.b = b;
    if (!zero_mass.empty()) em.zero_mass = zero_mass;
    p.emissions = {em};
    return p;
}

}  // namespace

TEST_SUITE("model-potentials") {
    TEST_CASE("pairwise potential: high on agreement, low otherwise") {
        const auto lat = one_cell_lattice();
        EdgeWeights w(1);
        w[0].spatial = {2.0, 0.0};
        w[0].temporal_scale = {1.5, -0.5};
        CHECK(pairwise_log_potential(EdgeClass::Spatial, 1, 1, w, lat, {0, 0}) == 2.0);
        CHECK(pairwise_log_potential(EdgeClass::Spatial, 1, 2, w, lat, {0, 0}) == 0.0);
        CHECK(pairwise_log_potential(EdgeClass::TemporalScale, 3, 3, w, lat, {0, 0}) == 1.5);
    }

    TEST_CASE("pairwise potential depends on states only through equality") {
        const auto lat = one_cell_lattice();
        EdgeWeights w(1);
        w[0].spatial = {0.7, 0.1};
        for (int z1 = 1; z1 <= 3; ++z1)
            for (int z2 = 1; z2 <= 3; ++z2) {
                // joint relabeling 1->2, 2->3, 3->1
                auto relabel = [](int z) { return z % 3 + 1; };
                CHECK(pairwise_log_potential(EdgeClass::Spatial, z1, z2, w, lat, {0, 0}) ==
                      pairwise_log_potential(EdgeClass::Spatial, relabel(z1), relabel(z2), w, lat,
                                             {0, 0}));
            }
    }

    TEST_CASE("gaussian log-density at its mean") {
        const auto lat = one_cell_lattice();
        const auto p = one_cell_params(lat, EmissionFamily::Gaussian, {5.0}, {2.0});
        CHECK(data_log_potential(1, 5.0, 0, 0, {0, 0}, p, lat) ==
              doctest::Approx(-1.612085713764618).epsilon(1e-9));
    }

    TEST_CASE("gamma(1,1) is the unit exponential") {
        const auto lat = one_cell_lattice();
        const auto p = one_cell_params(lat, EmissionFamily::Gamma, {1.0}, {1.0}, {0.0});
        CHECK(data_log_potential(1, 0.5, 0, 0, {0, 0}, p, lat) == doctest::Approx(-0.5));
    }

    TEST_CASE("gamma(2,3) at x=1: log(9 e^-3)") {
        // beta^alpha x^(alpha-1) e^(-beta x) / Gamma(alpha) = 9 e^-3
        const auto lat = one_cell_lattice();
        const auto p = one_cell_params(lat, EmissionFamily::Gamma, {2.0}, {3.0}, {0.0});
        CHECK(data_log_potential(1, 1.0, 0, 0, {0, 0}, p, lat) ==
              doctest::Approx(std::log(9.0) - 3.0).epsilon(1e-12));
    }

    TEST_CASE("domain and parameter errors") {
        const auto lat = one_cell_lattice();
        const auto p = one_cell_params(lat, EmissionFamily::Gamma, {2.0}, {3.0}, {0.0});
        CHECK_THROWS_AS(data_log_potential(1, -1.0, 0, 0, {0, 0}, p, lat), DomainError);
        const auto bad_sd = one_cell_params(lat, EmissionFamily::Gaussian, {0.0}, {0.0});
        CHECK_THROWS_AS(data_log_potential(1, 1.0, 0, 0, {0, 0}, bad_sd, lat), ParameterError);
        const auto bad_gamma = one_cell_params(lat, EmissionFamily::Gamma, {-1.0}, {1.0}, {0.0});
        CHECK_THROWS_AS(data_log_potential(1, 1.0, 0, 0, {0, 0}, bad_gamma, lat), ParameterError);
    }

    TEST_CASE("zero-inflated gamma: x = 0 contributes log(pi0)") {
        const auto lat = one_cell_lattice();
        const auto p = one_cell_params(lat, EmissionFamily::Gamma, {2.0}, {3.0}, {0.25});
        CHECK(data_log_potential(1, 0.0, 0, 0, {0, 0}, p, lat) == doctest::Approx(std::log(0.25)));
        // and the positive branch picks up log(1 - pi0)
        CHECK(data_log_potential(1, 1.0, 0, 0, {0, 0}, p, lat) ==
              doctest::Approx(std::log(0.75) + std::log(9.0) - 3.0));
    }

    TEST_CASE("emission density integrates to 1 (quadrature oracle)") {
        const auto lat = one_cell_lattice();
        const auto pg = one_cell_params(lat, EmissionFamily::Gaussian, {2.0}, {1.5});
        double mass = oracle::simpson(
            [&](double x) { return std::exp(data_log_potential(1, x, 0, 0, {0, 0}, pg, lat)); },
            2.0 - 12.0, 2.0 + 12.0, 4000);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));

        const auto pz = one_cell_params(lat, EmissionFamily::Gamma, {2.0}, {3.0}, {0.3});
        mass = 0.3 + oracle::simpson(
                         [&](double x) {
                             return std::exp(data_log_potential(1, x, 0, 0, {0, 0}, pz, lat));
                         },
                         1e-9, 30.0, 20000);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_SUITE("model-estimation") {
    TEST_CASE("two-point gaussian group: mean 5, sample stddev sqrt(2)") {
        const auto lat = one_cell_lattice(2);
        const auto obs = testutil::observations(lat, {4.0, 6.0});
        StateGrid z(1, 2);
        z.set(0, 0, 1);
        z.set(0, 1, 1);
        const auto em = estimate_emissions(obs, z, {0, 0}, EmissionFamily::Gaussian, 1, lat);
        CHECK(em.a[0] == doctest::Approx(5.0));
        CHECK(em.b[0] == doctest::Approx(std::sqrt(2.0)));
    }

    TEST_CASE("zero-variance group falls back to the pooled estimate") {
        json cfg;
        cfg["spatial_scales"] = json::array({json{{"size", 2}}});
        cfg["temporal_scales"] = {{{"size", 2}}};
        cfg["months_per_year"] = 1;
        const auto lat = MultiScaleLattice::build(cfg);
        // location 0 is constant {3,3}; location 1 is {1,5}.
        const auto obs = testutil::observations(lat, {3.0, 3.0, 1.0, 5.0});
        StateGrid z(2, 2);
        for (auto& v : z.z) v = 1;
        const auto em = estimate_emissions(obs, z, {0, 0}, EmissionFamily::Gaussian, 1, lat);
        // pooled over {3,3,1,5}: mean 3, sample var 8/3
        CHECK(em.a[em.idx(0, 0, 0)] == doctest::Approx(3.0));
        CHECK(em.b[em.idx(0, 0, 0)] == doctest::Approx(std::sqrt(8.0 / 3.0)));
        // location 1 keeps its own stats: mean 3, var 8
        CHECK(em.b[em.idx(1, 0, 0)] == doctest::Approx(std::sqrt(8.0)));
    }

    TEST_CASE("gamma method-of-moments on {1,2,3}: alpha 4, rate 2") {
        const auto lat = one_cell_lattice(3);
        const auto obs = testutil::observations(lat, {1.0, 2.0, 3.0});
        StateGrid z(1, 3);
        for (auto& v : z.z) v = 1;
        const auto em = estimate_emissions(obs, z, {0, 0}, EmissionFamily::Gamma, 1, lat);
        CHECK(em.a[0] == doctest::Approx(4.0));
        CHECK(em.b[0] == doctest::Approx(2.0));
        CHECK(em.zero_mass[0] == doctest::Approx(0.0));
    }

    TEST_CASE("empty group across all locations is an estimation error") {
        const auto lat = one_cell_lattice(2);
        const auto obs = testutil::observations(lat, {4.0, 6.0});
        StateGrid z(1, 2);
        z.set(0, 0, 1);
        z.set(0, 1, 1);
        CHECK_THROWS_AS(estimate_emissions(obs, z, {0, 0}, EmissionFamily::Gaussian, 2, lat),
                        EstimationError);
    }

    TEST_CASE("gaussian recovery from 10k samples (fixed seed)") {
        const double mu = 3.5, sd = 1.25;
        const int n = 10000;
        json cfg;
        cfg["spatial_scales"] = json::array({json{{"size", 1}}});
        cfg["temporal_scales"] = {{{"size", n}}};
        cfg["months_per_year"] = 1;
        const auto lat = MultiScaleLattice::build(cfg);
        Rng rng(1234);
        std::vector<double> vals(n);
        for (double& v : vals) v = mu + sd * rng.normal();
        const auto obs = testutil::observations(lat, vals);
        StateGrid z(1, n);
        for (auto& v : z.z) v = 1;
        const auto em = estimate_emissions(obs, z, {0, 0}, EmissionFamily::Gaussian, 1, lat);
        CHECK(std::abs(em.a[0] - mu) < 3.0 * sd / std::sqrt(static_cast<double>(n)));
        CHECK(std::abs(em.b[0] - sd) / sd < 0.2);
    }

    TEST_CASE("canonical ordering: 1 highest mean, 2 lowest, 3 middle") {
        const auto lat = one_cell_lattice(3);
        ScaleEmissions em = testutil::gaussian_emissions(lat, {0, 0}, {1.0, 9.0, -4.0}, {1, 1, 1});
        StateGrid z(1, 3);
        z.set(0, 0, 1);
        z.set(0, 1, 2);
        z.set(0, 2, 3);
        canonicalize_states(em, &z);
        CHECK(em.a[0] == doctest::Approx(9.0));   // state 1
        CHECK(em.a[1] == doctest::Approx(-4.0));  // state 2
        CHECK(em.a[2] == doctest::Approx(1.0));   // state 3
        CHECK(z.at(0, 0) == 3);
        CHECK(z.at(0, 1) == 1);
        CHECK(z.at(0, 2) == 2);
    }
}

TEST_SUITE("model-edge-weights") {
    TEST_CASE("identical neighbor series: correlation 1, high = coupling") {
        const auto lat = testutil::single_scale(testutil::path_neighbors(2), 4);
        const auto obs = testutil::observations(lat, {1, 2, 3, 4, 1, 2, 3, 4});
        const auto w = default_edge_weights(obs, lat, 2.0);
        CHECK(w[0].spatial.high == doctest::Approx(2.0));
        CHECK(w[0].spatial.low == 0.0);
    }

    TEST_CASE("anti-correlated pair is skipped; all skipped falls back to 0.5") {
        const auto lat = testutil::single_scale(testutil::path_neighbors(2), 4);
        const auto obs = testutil::observations(lat, {1, 2, 3, 4, 4, 3, 2, 1});
        const auto w = default_edge_weights(obs, lat, 2.0);
        CHECK(w[0].spatial.high == doctest::Approx(1.0));  // 2 * 0.5 fallback
    }

    TEST_CASE("correlations {0.8, 0.4} with coupling 2 give high = 1.2") {
        // Path 0-1-2; series built from orthogonal mean-zero vectors so the
        // pair correlations are exactly 0.8 and 0.4.
        const auto lat = testutil::single_scale(testutil::path_neighbors(3), 4);
        const double r2 = std::sqrt(1.0 - 0.8 * 0.8), r3 = std::sqrt(1.0 - 0.4 * 0.4);
        std::vector<double> vals;
        const double u[4] = {1, -1, 1, -1}, v[4] = {1, 1, -1, -1}, w4[4] = {1, -1, -1, 1};
        for (int t = 0; t < 4; ++t) vals.push_back(0.8 * u[t] + r2 * v[t]);  // s0
        for (int t = 0; t < 4; ++t) vals.push_back(u[t]);                    // s1 (center)
        for (int t = 0; t < 4; ++t) vals.push_back(0.4 * u[t] + r3 * w4[t]); // s2
        const auto obs = testutil::observations(lat, vals);
        const auto w = default_edge_weights(obs, lat, 2.0);
        CHECK(w[0].spatial.high == doctest::Approx(1.2).epsilon(1e-9));
    }

    TEST_CASE("derived weights always satisfy high >= low = 0") {
        json cfg;
        cfg["spatial_scales"] = json::array();
        cfg["spatial_scales"].push_back({{"grid", {{"rows", 3}, {"cols", 3}}}});
        cfg["spatial_scales"].push_back({{"size", 1}});
        cfg["temporal_scales"] = {{{"size", 8}}, {{"size", 4}}};
        cfg["spatial_groups"] = json::array({json{{"uniform", 9}}});
        cfg["temporal_groups"] = json::array({json{{"uniform", 2}}});
        cfg["months_per_year"] = 4;
        const auto lat = MultiScaleLattice::build(cfg);
        Rng rng(5);
        std::vector<double> vals(9 * 8);
        for (double& v : vals) v = rng.normal();
        const auto obs = testutil::observations(lat, vals);
        for (const auto& sw : default_edge_weights(obs, lat, 2.0)) {
            for (auto cls : {EdgeClass::Spatial, EdgeClass::Temporal, EdgeClass::SpatialScale,
                             EdgeClass::TemporalScale}) {
                CHECK(sw.of(cls).low == 0.0);
                CHECK(sw.of(cls).high >= 0.1 * 2.0 - 1e-12);
            }
        }
    }

    TEST_CASE("per-pair spatial overrides take precedence") {
        ScaleWeights sw;
        sw.spatial = {1.0, 0.0};
        sw.spatial_pair[{0, 1}] = {3.0, 0.5};
        CHECK(sw.spatial_for(1, 0).high == 3.0);
        CHECK(sw.spatial_for(0, 2).high == 1.0);
    }
}

TEST_SUITE("model-serialization") {
    TEST_CASE("model params survive a JSON round trip") {
        const auto lat = one_cell_lattice(2);
        ModelParams p;
        p.states_per_scale = {2};
        p.edge_weights = testutil::uniform_weights(lat, 1.5, 0.5, 0.25, 0.125);
        p.edge_weights[0].spatial_pair[{0, 1}] = {2.5, -0.5};
        ScaleEmissions em;
        em.family = EmissionFamily::Gamma;
        em.locations = 1;
        em.groups = 1;
        em.k_states = 2;
        em.resize();
        em.a = {2.0, 1.0};
        em.b = {3.0, 0.5};
        em.zero_mass = {0.1, 0.2};
        p.emissions = {em};

        const ModelParams q = model_params_from_json(model_params_to_json(p));
        CHECK(q.states_per_scale == p.states_per_scale);
        CHECK(q.edge_weights[0].spatial.high == 1.5);
        CHECK(q.edge_weights[0].spatial_pair.at({0, 1}).high == 2.5);
        CHECK(q.emissions[0].family == EmissionFamily::Gamma);
        CHECK(q.emissions[0].a == em.a);
        CHECK(q.emissions[0].b == em.b);
        CHECK(q.emissions[0].zero_mass == em.zero_mass);
    }
}
