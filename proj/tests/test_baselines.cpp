#include <cmath>

#include "doctest.h"
#include "msmrf/baselines.hpp"
#include "test_support.hpp"

using namespace msmrf;
using nlohmann::json;

namespace {

ModelParams gaussian_params(const MultiScaleLattice& lat, std::vector<double> means,
                            std::vector<double> sds, EdgeWeights w) {
    ModelParams p;
    p.edge_weights = std::move(w);
    for (int si = 0; si < lat.num_scales(); ++si) {
        p.states_per_scale.push_back(static_cast<int>(means.size()));
        p.emissions.push_back(testutil::gaussian_emissions(lat, lat.scale_at(si), means, sds));
    }
    return p;
}

}  // namespace

TEST_SUITE("oracle-examples-baselines") {
    TEST_CASE("3-state rule on a series with mean 5 and population stddev 2") {
        // {8,5,8,6,3,3,3,4}: mean 5, population variance 4. The rule puts 8
        // above mean+sd, leaves 5 and 6 normal, and treats 3 (= mean - sd
        // exactly) as a tie assigned to normal.
        const auto lat = testutil::single_scale({{}}, 8);
        const auto obs = testutil::observations(lat, {8, 5, 8, 6, 3, 3, 3, 4});
        const auto z = threshold_detect(obs, lat, {3});
        const std::vector<int> want = {1, 3, 1, 3, 3, 3, 3, 3};
        CHECK(z.grid(0).z == want);
    }

    TEST_CASE("series {2,4,6,8,10}: population stddev sqrt(8), X=2 is state 2") {
        const auto lat = testutil::single_scale({{}}, 5);
        const auto obs = testutil::observations(lat, {2, 4, 6, 8, 10});
        ThresholdParams tp;
        const auto z = threshold_detect(obs, lat, {3}, true, &tp);
        CHECK(tp.scales[0].mean[0] == doctest::Approx(6.0));
        CHECK(tp.scales[0].sd[0] == doctest::Approx(std::sqrt(8.0)));
        CHECK(z.grid(0).at(0, 0) == 2);   // 2 < 6 - 2.828
        CHECK(z.grid(0).at(0, 4) == 1);   // 10 > 6 + 2.828
        CHECK(z.grid(0).at(0, 2) == 3);
    }

    TEST_CASE("2-state scale compares against the mean only") {
        const auto lat = testutil::single_scale({{}}, 4);
        const auto obs = testutil::observations(lat, {1, 3, 2, 2});
        const auto z = threshold_detect(obs, lat, {2});
        CHECK(z.grid(0).at(0, 0) == 2);
        CHECK(z.grid(0).at(0, 1) == 1);
        CHECK(z.grid(0).at(0, 2) == 2);  // tie at the mean goes low
        CHECK(z.grid(0).at(0, 3) == 2);
    }

    TEST_CASE("sample-stddev convention flag") {
        const auto lat = testutil::single_scale({{}}, 5);
        const auto obs = testutil::observations(lat, {2, 4, 6, 8, 10});
        ThresholdParams tp;
        threshold_detect(obs, lat, {3}, false, &tp);
        CHECK(tp.scales[0].sd[0] == doctest::Approx(std::sqrt(10.0)));
    }
}

TEST_SUITE("baselines-properties") {
    TEST_CASE("threshold labels are invariant under a constant shift") {
        const auto lat = testutil::single_scale(testutil::path_neighbors(3), 6,
                                                /*months_per_year=*/2);
        Rng rng(15);
        std::vector<double> vals(18);
        for (double& v : vals) v = 3.0 * rng.uniform();
        const auto obs = testutil::observations(lat, vals);
        std::vector<double> shifted = vals;
        for (double& v : shifted) v += 11.5;
        const auto obs2 = testutil::observations(lat, shifted);
        const auto z1 = threshold_detect(obs, lat, {3});
        const auto z2 = threshold_detect(obs2, lat, {3});
        CHECK(z1.grid(0).z == z2.grid(0).z);
    }

    TEST_CASE("constant data is all-normal at 3-state scales") {
        const auto lat = testutil::single_scale(testutil::path_neighbors(2), 4);
        const auto obs = testutil::observations(lat, std::vector<double>(8, 3.3));
        const auto z = threshold_detect(obs, lat, {3});
        for (int v : z.grid(0).z) CHECK(v == 3);
    }

    TEST_CASE("single-sample groups are flagged") {
        const auto lat = testutil::single_scale({{}}, 2, /*months_per_year=*/2);
        const auto obs = testutil::observations(lat, {1.0, 2.0});
        ThresholdParams tp;
        threshold_detect(obs, lat, {3}, true, &tp);
        CHECK(tp.flagged.empty());  // population sd of one sample is defined (0)
        threshold_detect(obs, lat, {3}, false, &tp);
        CHECK(tp.flagged.size() == 2);  // n-1 denominator degenerates
    }
}

TEST_SUITE("oracle-examples-baselines-stmrf") {
    TEST_CASE("stmrf equals full inference exactly on a single-scale lattice") {
        const auto lat = testutil::single_scale(testutil::path_neighbors(4), 6);
        Rng rng(21);
        std::vector<double> vals(24);
        for (double& v : vals) v = rng.normal();
        const auto obs = testutil::observations(lat, vals);
        const auto params = gaussian_params(lat, {-0.7, 0.7}, {1, 1},
                                            testutil::uniform_weights(lat, 0.6, 0.6));
        GibbsConfig cfg;
        cfg.burn_in = 30;
        cfg.samples = 20;
        cfg.thin = 2;
        cfg.refit_every = 0;
        cfg.init = InitMode::UniformRandom;
        cfg.seed = 77;
        const auto a = run_inference(obs, lat, params, cfg);
        const auto b = stmrf_detect(obs, lat, params, cfg);
        CHECK(a.map_states.grid(0).z == b.map_states.grid(0).z);
        CHECK(a.marginals[0] == b.marginals[0]);
    }

    TEST_CASE("zero-coupling stmrf equals the data-only argmax") {
        const auto lat = testutil::single_scale(testutil::path_neighbors(5), 4);
        Rng rng(33);
        std::vector<double> vals(20);
        for (double& v : vals) v = (rng.uniform() < 0.5 ? -3.0 : 3.0) + 0.2 * rng.normal();
        const auto obs = testutil::observations(lat, vals);
        const auto params = gaussian_params(lat, {3.0, -3.0}, {1, 1},
                                            testutil::equal_weights(lat, 0.5));
        GibbsConfig cfg;
        cfg.burn_in = 40;
        cfg.samples = 30;
        cfg.thin = 1;
        cfg.refit_every = 0;
        cfg.init = InitMode::UniformRandom;
        cfg.seed = 3;
        const auto post = stmrf_detect(obs, lat, params, cfg);
        for (int s = 0; s < 5; ++s)
            for (int t = 0; t < 4; ++t)
                CHECK(post.map_states.grid(0).at(s, t) == (obs.grid(0).at(s, t) > 0 ? 1 : 2));
    }

    TEST_CASE("cross-scale evidence separates msstmrf from stmrf") {
        // The 12 fine cells are unambiguous anomalies; the single coarse cell
        // is data-ambiguous and flips only when scale edges carry the fine
        // evidence upward.
        json cfg;
        cfg["spatial_scales"] = json::array({json{{"size", 1}}});
        cfg["temporal_scales"] = {{{"size", 12}}, {{"size", 1}}};
        cfg["temporal_groups"] = json::array({json{{"uniform", 12}}});
        cfg["months_per_year"] = 1;
        const auto lat = MultiScaleLattice::build(cfg);
        const auto obs = testutil::observations(lat, std::vector<double>(12, 1.0));
        // coarse observation is the mean (1.0): state-2 emission slightly
        // favored there
        ModelParams p;
        p.states_per_scale = {2, 2};
        p.edge_weights = testutil::uniform_weights(lat, 0.0, 0.0, 0.0, 1.0);
        p.emissions = {testutil::gaussian_emissions(lat, {0, 0}, {1.0, -1.0}, {0.1, 0.1}),
                       testutil::gaussian_emissions(lat, {0, 1}, {1.6, 0.8}, {0.3, 0.3})};
        GibbsConfig gc;
        gc.burn_in = 100;
        gc.samples = 50;
        gc.thin = 1;
        gc.refit_every = 0;
        gc.init = InitMode::UniformRandom;
        gc.seed = 17;
        const auto ms = run_inference(obs, lat, p, gc);
        const auto st = stmrf_detect(obs, lat, p, gc);
        CHECK(ms.map_states.grid(1).at(0, 0) == 1);  // pulled up by 12 children
        CHECK(st.map_states.grid(1).at(0, 0) == 2);  // data-only stays low
        CHECK(ms.map_states.grid(0).z == st.map_states.grid(0).z);
    }
}
