#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "msmrf/io.hpp"
#include "test_support.hpp"

using namespace msmrf;

TEST_SUITE("io") {
    TEST_CASE("state CSV round trip, including missing labels") {
        StateGrid z(3, 4);
        int label = 0;
        for (auto& v : z.z) v = label++ % 4;  // includes 0 = missing
        const std::string path = testutil::temp_dir("io") + "/states.csv";
        write_state_csv(z, path);
        const StateGrid back = read_state_csv(path);
        CHECK(back.locations == 3);
        CHECK(back.times == 4);
        CHECK(back.z == z.z);
    }

    TEST_CASE("region CSV carries the documented header") {
        AnomalyRegion r;
        r.scale = {0, 1};
        r.state = 2;
        r.cells = {{0, 0}, {0, 1}};
        r.st_size = 2;
        r.spatial_size = 1;
        r.temporal_size = 2;
        r.mean_value = 3.25;
        const std::string path = testutil::temp_dir("io") + "/regions.csv";
        write_regions_csv({r}, path);
        std::ifstream in(path);
        std::string header, row;
        std::getline(in, header);
        std::getline(in, row);
        CHECK(header == "region_id,l,m,state,st_size,spatial_size,temporal_size,mean_value");
        CHECK(row == "0,0,1,2,2,1,2,3.25");
    }

    TEST_CASE("checksum is stable and content-sensitive") {
        const std::string dir = testutil::temp_dir("io");
        std::ofstream(dir + "/a.txt") << "hello";
        std::ofstream(dir + "/b.txt") << "hello";
        std::ofstream(dir + "/c.txt") << "world";
        CHECK(file_checksum(dir + "/a.txt") == file_checksum(dir + "/b.txt"));
        CHECK(file_checksum(dir + "/a.txt") != file_checksum(dir + "/c.txt"));
    }
}
