#include <numeric>

#include "doctest.h"
#include "msmrf/errors.hpp"
#include "msmrf/lattice.hpp"
#include "msmrf/rng.hpp"
#include "test_support.hpp"

using msmrf::MultiScaleLattice;
using msmrf::ScaleId;
using nlohmann::json;

namespace {

json india_grid_config() {
    json cfg;
    cfg["spatial_scales"] = json::array();
    cfg["spatial_scales"].push_back({{"grid", {{"rows", 21}, {"cols", 17}}}});
    cfg["spatial_scales"].push_back({{"size", 1}});
    cfg["temporal_scales"] = {{{"size", 1332}}, {{"size", 111}}};
    cfg["spatial_groups"] = json::array({json{{"uniform", 357}}});
    cfg["temporal_groups"] = json::array({json{{"uniform", 12}}});
    cfg["months_per_year"] = 12;
    return cfg;
}

json grid3x3_config(std::vector<int> mask = {}) {
    json grid = {{"rows", 3}, {"cols", 3}};
    if (!mask.empty()) grid["mask"] = mask;
    json cfg;
    cfg["spatial_scales"] = json::array({json{{"grid", grid}}});
    cfg["temporal_scales"] = {{{"size", 1}}};
    return cfg;
}

}  // namespace

TEST_SUITE("oracle-examples-lattice") {
    TEST_CASE("india-scale config reproduces the four retained scales") {
        const auto lat = MultiScaleLattice::build(india_grid_config());
        CHECK(lat.num_spatial_scales() == 2);
        CHECK(lat.num_temporal_scales() == 2);
        CHECK(lat.spatial_size(0) == 357);
        CHECK(lat.spatial_size(1) == 1);
        CHECK(lat.temporal_size(0) == 1332);
        CHECK(lat.temporal_size(1) == 111);
        CHECK(lat.num_scales() == 4);
    }

    TEST_CASE("1x1 grid, single scale: no neighbors, no parents") {
        json cfg;
        cfg["spatial_scales"] = json::array({json{{"grid", {{"rows", 1}, {"cols", 1}}}}});
        cfg["temporal_scales"] = {{{"size", 1}}};
        const auto lat = MultiScaleLattice::build(cfg);
        CHECK(lat.neighbors(0, 0).empty());
        CHECK_THROWS_AS(lat.parent_spatial(0, 0), msmrf::ScaleBoundaryError);
        CHECK_THROWS_AS(lat.parent_temporal(0, 0), msmrf::ScaleBoundaryError);
    }

    TEST_CASE("2x2 unmasked grid: every cell has exactly 2 neighbors") {
        json cfg;
        cfg["spatial_scales"] = json::array({json{{"grid", {{"rows", 2}, {"cols", 2}}}}});
        cfg["temporal_scales"] = {{{"size", 1}}};
        const auto lat = MultiScaleLattice::build(cfg);
        for (int s = 0; s < 4; ++s) CHECK(lat.neighbors(0, s).size() == 2);
    }

    TEST_CASE("single-location scale has no neighbors") {
        const auto lat = MultiScaleLattice::build(india_grid_config());
        CHECK(lat.neighbors(1, 0).empty());
    }

    TEST_CASE("center of unmasked 3x3 grid has 4 neighbors") {
        const auto lat = MultiScaleLattice::build(grid3x3_config());
        CHECK(lat.neighbors(0, 4).size() == 4);  // row-major center
    }

    TEST_CASE("corner of 3x3 grid with masked center has 2 neighbors") {
        // Hand enumeration: with cell (1,1) masked, corner (0,0) keeps its two
        // edge neighbors (0,1) and (1,0), renumbered to locations 1 and 3.
        const auto lat = MultiScaleLattice::build(grid3x3_config({1, 1, 1, 1, 0, 1, 1, 1, 1}));
        CHECK(lat.spatial_size(0) == 8);
        CHECK(lat.neighbors(0, 0) == std::vector<int>{1, 3});
    }

    TEST_CASE("india grid: every location maps to the single country cell") {
        const auto lat = MultiScaleLattice::build(india_grid_config());
        for (int s = 0; s < 357; ++s) CHECK(lat.parent_spatial(0, s) == 0);
    }

    TEST_CASE("12-month grouping: temporal parent is t / 12") {
        const auto lat = MultiScaleLattice::build(india_grid_config());
        for (int t : {0, 11, 12, 119, 1331}) CHECK(lat.parent_temporal(0, t) == t / 12);
    }

    TEST_CASE("12-month grouping: children of year 3 are 36..47") {
        const auto lat = MultiScaleLattice::build(india_grid_config());
        std::vector<int> want(12);
        std::iota(want.begin(), want.end(), 36);
        CHECK(lat.children_temporal(1, 3) == want);
    }

    TEST_CASE("overlapping child groups are a partition error") {
        json cfg = india_grid_config();
        cfg["temporal_scales"] = {{{"size", 4}}, {{"size", 2}}};
        cfg["temporal_groups"] = json::array({json::array({json::array({0, 1}),
                                                           json::array({1, 2, 3})})});
        CHECK_THROWS_AS(MultiScaleLattice::build(cfg), msmrf::PartitionError);
    }

    TEST_CASE("non-covering child groups are a partition error") {
        json cfg = india_grid_config();
        cfg["temporal_scales"] = {{{"size", 4}}, {{"size", 2}}};
        cfg["temporal_groups"] = json::array({json::array({json::array({0, 1}),
                                                           json::array({2})})});
        CHECK_THROWS_AS(MultiScaleLattice::build(cfg), msmrf::PartitionError);
    }

    TEST_CASE("asymmetric explicit neighbor list is a topology error") {
        json cfg;
        cfg["spatial_scales"] = json::array(
            {json{{"size", 2}, {"neighbors", json::array({json::array({1}), json::array()})}}});
        cfg["temporal_scales"] = {{{"size", 1}}};
        CHECK_THROWS_AS(MultiScaleLattice::build(cfg), msmrf::TopologyError);
    }

    TEST_CASE("empty scale is a config error") {
        json cfg;
        cfg["spatial_scales"] = json::array({json{{"size", 0}}});
        cfg["temporal_scales"] = {{{"size", 1}}};
        CHECK_THROWS_AS(MultiScaleLattice::build(cfg), msmrf::ConfigError);
    }

    TEST_CASE("out-of-range queries are bounds errors") {
        const auto lat = MultiScaleLattice::build(grid3x3_config());
        CHECK_THROWS_AS(lat.neighbors(0, 9), msmrf::BoundsError);
        CHECK_THROWS_AS(lat.neighbors(1, 0), msmrf::BoundsError);
        CHECK_THROWS_AS(lat.children_spatial(0, 0), msmrf::ScaleBoundaryError);
    }
}

TEST_SUITE("lattice-properties") {
    TEST_CASE("round trip, partition and symmetry over randomized lattices") {
        msmrf::Rng rng(20240817);
        for (int rep = 0; rep < 10; ++rep) {
            const int s0 = 4 + rng.uniform_int(9);
            const int t0 = 4 + rng.uniform_int(9);
            const int s1 = 1 + rng.uniform_int(3);
            const int t1 = 1 + rng.uniform_int(3);

            // Random partitions: deal fine indices into coarse bins, each
            // bin guaranteed non-empty.
            auto random_groups = [&](int fine, int coarse) {
                std::vector<std::vector<int>> groups(coarse);
                for (int i = 0; i < coarse; ++i) groups[i].push_back(i);
                for (int i = coarse; i < fine; ++i) groups[rng.uniform_int(coarse)].push_back(i);
                return groups;
            };

            json cfg;
            cfg["spatial_scales"] = json::array();
            cfg["spatial_scales"].push_back(
                {{"grid", {{"rows", s0}, {"cols", 3}}}});
            cfg["spatial_scales"].push_back({{"size", s1}});
            cfg["temporal_scales"] = {{{"size", t0}}, {{"size", t1}}};
            cfg["spatial_groups"] = json::array({random_groups(s0 * 3, s1)});
            cfg["temporal_groups"] = json::array({random_groups(t0, t1)});
            const auto lat = MultiScaleLattice::build(cfg);

            // Round trip + partition (spatial).
            int covered = 0;
            for (int p = 0; p < s1; ++p) covered += static_cast<int>(lat.children_spatial(1, p).size());
            CHECK(covered == s0 * 3);
            for (int s = 0; s < s0 * 3; ++s) {
                const auto& kids = lat.children_spatial(1, lat.parent_spatial(0, s));
                CHECK(std::binary_search(kids.begin(), kids.end(), s));
            }
            covered = 0;
            for (int p = 0; p < t1; ++p) covered += static_cast<int>(lat.children_temporal(1, p).size());
            CHECK(covered == t0);
            for (int t = 0; t < t0; ++t) {
                const auto& kids = lat.children_temporal(1, lat.parent_temporal(0, t));
                CHECK(std::binary_search(kids.begin(), kids.end(), t));
            }

            // Symmetry with zero diagonal.
            for (int s = 0; s < s0 * 3; ++s) {
                for (int s2 : lat.neighbors(0, s)) {
                    CHECK(s2 != s);
                    const auto& back = lat.neighbors(0, s2);
                    CHECK(std::binary_search(back.begin(), back.end(), s));
                }
            }
        }
    }

    TEST_CASE("8-connectivity flag joins diagonals") {
        json cfg;
        cfg["spatial_scales"] = json::array(
            {json{{"grid", {{"rows", 2}, {"cols", 2}, {"connectivity", 8}}}}});
        cfg["temporal_scales"] = {{{"size", 1}}};
        const auto lat = MultiScaleLattice::build(cfg);
        for (int s = 0; s < 4; ++s) CHECK(lat.neighbors(0, s).size() == 3);
    }

    TEST_CASE("calendar groups follow the finest temporal scale") {
        const auto lat = MultiScaleLattice::build(india_grid_config());
        CHECK(lat.calendar_groups(0) == 12);
        CHECK(lat.calendar_groups(1) == 1);
        CHECK(lat.calendar_of(0, 13) == 1);
        CHECK(lat.calendar_of(1, 13) == 0);
    }
}
