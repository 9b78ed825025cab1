#include "doctest.h"
#include "msmrf/baselines.hpp"
#include "msmrf/errors.hpp"
#include "msmrf/synth.hpp"
#include "test_support.hpp"

using namespace msmrf;
using nlohmann::json;

namespace {

json lattice_12x24() {
    json cfg;
    cfg["spatial_scales"] = json::array({json{{"grid", {{"rows", 3}, {"cols", 4}}}}});
    cfg["temporal_scales"] = {{{"size", 24}}, {{"size", 2}}};
    cfg["temporal_groups"] = json::array({json{{"uniform", 12}}});
    cfg["months_per_year"] = 12;
    return cfg;
}

}  // namespace

TEST_SUITE("synth") {
    TEST_CASE("no planted regions: ground truth is all normal") {
        SynthConfig cfg;
        cfg.lattice = lattice_12x24();
        cfg.mean.assign(12, 5.0);
        cfg.stddev.assign(12, 1.0);
        cfg.shape.assign(12, 2.0);
        cfg.zero_mass.assign(12, 0.0);
        const auto lat = MultiScaleLattice::build(cfg.lattice);
        const auto r = generate(cfg, lat);
        for (const auto& g : r.truth.scales)
            for (int v : g.z) CHECK(v == 3);
    }

    TEST_CASE("zero delta is a config error") {
        SynthConfig cfg;
        cfg.lattice = lattice_12x24();
        cfg.mean.assign(12, 5.0);
        cfg.stddev.assign(12, 1.0);
        cfg.shape.assign(12, 2.0);
        cfg.zero_mass.assign(12, 0.0);
        PlantedRegion r;
        r.state = 1;
        r.delta = 0.0;
        r.s0 = r.t0 = 0;
        r.s1 = r.t1 = 1;
        cfg.planted = {r};
        const auto lat = MultiScaleLattice::build(cfg.lattice);
        CHECK_THROWS_AS(generate(cfg, lat), ConfigError);
    }

    TEST_CASE("conflicting overlapping regions are a config error") {
        SynthConfig cfg;
        cfg.lattice = lattice_12x24();
        cfg.mean.assign(12, 5.0);
        cfg.stddev.assign(12, 1.0);
        cfg.shape.assign(12, 2.0);
        cfg.zero_mass.assign(12, 0.0);
        PlantedRegion a, b;
        a.state = 1;
        a.delta = 1.0;
        a.s0 = a.t0 = 0;
        a.s1 = a.t1 = 3;
        b = a;
        b.state = 2;
        cfg.planted = {a, b};
        const auto lat = MultiScaleLattice::build(cfg.lattice);
        CHECK_THROWS_AS(generate(cfg, lat), ConfigError);
    }

    TEST_CASE("coarse truth follows the strict majority of children") {
        // A 6-month box inside year 0 covers exactly half the year: not
        // marked. An 8-month box inside year 1 is marked for its locations.
        SynthConfig cfg;
        cfg.lattice = lattice_12x24();
        cfg.mean.assign(12, 5.0);
        cfg.stddev.assign(12, 1.0);
        cfg.shape.assign(12, 2.0);
        cfg.zero_mass.assign(12, 0.0);
        PlantedRegion half, most;
        half.state = 1;
        half.delta = 2.0;
        half.s0 = 0;
        half.s1 = 9;
        half.t0 = 3;
        half.t1 = 8;  // 6 of 12 months in year 0
        most = half;
        most.t0 = 12;
        most.t1 = 19;  // 8 of 12 months in year 1
        cfg.planted = {half, most};
        const auto lat = MultiScaleLattice::build(cfg.lattice);
        const auto r = generate(cfg, lat);
        const auto& annual = r.truth.grid(lat.scale_index({0, 1}));
        for (int s = 0; s < 12; ++s) {
            CHECK(annual.at(s, 0) == 3);
            CHECK(annual.at(s, 1) == (s <= 9 ? 1 : 3));
        }
    }

    TEST_CASE("strong planted signal is visible to the threshold detector") {
        // 10 years, so each (location, month) group holds one anomalous year
        // at most and the local statistics stay representative.
        SynthConfig cfg;
        cfg.lattice = lattice_12x24();
        cfg.lattice["temporal_scales"] = {{{"size", 120}}, {{"size", 10}}};
        cfg.mean.assign(12, 5.0);
        cfg.stddev.assign(12, 1.0);
        cfg.shape.assign(12, 2.0);
        cfg.zero_mass.assign(12, 0.0);
        cfg.seed = 9;
        PlantedRegion pos, neg;
        pos.state = 1;
        pos.delta = 5.0;  // 5 background stddevs
        pos.s0 = 0;
        pos.s1 = 5;
        pos.t0 = 26;
        pos.t1 = 33;
        neg.state = 2;
        neg.delta = 5.0;
        neg.s0 = 6;
        neg.s1 = 11;
        neg.t0 = 62;
        neg.t1 = 69;
        cfg.planted = {pos, neg};
        const auto lat = MultiScaleLattice::build(cfg.lattice);
        const auto r = generate(cfg, lat);
        ObservationSet obs = aggregate(r.observations, lat);
        const auto z = threshold_detect(obs, lat, {3, 3});
        int hit = 0, total = 0;
        const auto& truth = r.truth.grid(0);
        for (int s = 0; s < 12; ++s)
            for (int t = 0; t < 120; ++t) {
                if (truth.at(s, t) == 3) continue;
                ++total;
                if (z.grid(0).at(s, t) == truth.at(s, t)) ++hit;
            }
        CHECK(total == 6 * 8 * 2);
        CHECK(static_cast<double>(hit) / total >= 0.95);
    }

    TEST_CASE("gamma noise stays non-negative and clamps negative shifts") {
        SynthConfig cfg;
        cfg.lattice = lattice_12x24();
        cfg.family = EmissionFamily::Gamma;
        cfg.mean.assign(12, 2.0);
        cfg.stddev.assign(12, 1.0);
        cfg.shape.assign(12, 2.0);
        cfg.zero_mass.assign(12, 0.1);
        cfg.seed = 4;
        PlantedRegion neg;
        neg.state = 2;
        neg.delta = 5.0;  // drives the mean to max(2 - 5, 0) = 0
        neg.s0 = 0;
        neg.s1 = 3;
        neg.t0 = 0;
        neg.t1 = 9;
        cfg.planted = {neg};
        const auto lat = MultiScaleLattice::build(cfg.lattice);
        const auto r = generate(cfg, lat);
        const auto& g = r.observations.grid(ScaleId{0, 0});
        for (double v : g.value) CHECK(v >= 0.0);
        for (int s = 0; s <= 3; ++s)
            for (int t = 0; t <= 9; ++t) CHECK(g.at(s, t) == 0.0);
    }

    TEST_CASE("same seed regenerates bit-identical data") {
        SynthConfig cfg;
        cfg.lattice = lattice_12x24();
        cfg.mean.assign(12, 5.0);
        cfg.stddev.assign(12, 1.0);
        cfg.shape.assign(12, 2.0);
        cfg.zero_mass.assign(12, 0.0);
        cfg.seed = 31337;
        const auto lat = MultiScaleLattice::build(cfg.lattice);
        const auto a = generate(cfg, lat);
        const auto b = generate(cfg, lat);
        CHECK(a.observations.grid(ScaleId{0, 0}).value == b.observations.grid(ScaleId{0, 0}).value);
        cfg.seed = 31338;
        const auto c = generate(cfg, lat);
        CHECK(a.observations.grid(ScaleId{0, 0}).value != c.observations.grid(ScaleId{0, 0}).value);
    }

    TEST_CASE("config json round trip") {
        json j;
        j["lattice"] = lattice_12x24();
        j["family"] = "gamma";
        j["mean"] = 4.0;
        j["stddev"] = 1.5;
        j["shape"] = 2.5;
        j["zero_mass"] = 0.2;
        j["seed"] = 77;
        j["planted"] = json::array(
            {json{{"state", 1}, {"delta", 2.0}, {"s0", 0}, {"s1", 1}, {"t0", 0}, {"t1", 5}}});
        const auto cfg = SynthConfig::from_json(j);
        CHECK(cfg.family == EmissionFamily::Gamma);
        CHECK(cfg.mean.size() == 12);
        CHECK(cfg.mean[3] == doctest::Approx(4.0));
        CHECK(cfg.planted.size() == 1);
        const auto cfg2 = SynthConfig::from_json(cfg.to_json());
        CHECK(cfg2.seed == 77);
        CHECK(cfg2.planted[0].t1 == 5);
    }
}
