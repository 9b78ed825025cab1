#include "msmrf/io.hpp"

#include <charconv>
#include <fstream>

#include "msmrf/errors.hpp"

namespace msmrf {

void write_state_csv(const StateGrid& z, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    for (int s = 0; s < z.locations; ++s) {
        for (int t = 0; t < z.times; ++t) {
            if (t) out << ',';
            out << z.at(s, t);
        }
        out << '\n';
    }
}

StateGrid read_state_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<std::vector<int>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<int> row;
        size_t pos = 0;
        while (pos <= line.size()) {
            size_t end = line.find(',', pos);
            if (end == std::string::npos) end = line.size();
            int v = 0;
            const auto [p, ec] = std::from_chars(line.data() + pos, line.data() + end, v);
            if (ec != std::errc() || p != line.data() + end)
                throw ParseError(path + ": non-integer state label");
            row.push_back(v);
            if (end == line.size()) break;
            pos = end + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ShapeError(path + ": ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ShapeError(path + ": empty state file");
    StateGrid z(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int s = 0; s < z.locations; ++s)
        for (int t = 0; t < z.times; ++t) z.set(s, t, rows[s][t]);
    return z;
}

void write_regions_csv(const std::vector<AnomalyRegion>& regions, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << "region_id,l,m,state,st_size,spatial_size,temporal_size,mean_value\n";
    out.precision(12);
    for (size_t i = 0; i < regions.size(); ++i) {
        const auto& r = regions[i];
        out << i << ',' << r.scale.l << ',' << r.scale.m << ',' << r.state << ',' << r.st_size
            << ',' << r.spatial_size << ',' << r.temporal_size << ',' << r.mean_value << '\n';
    }
}

void write_region_cells_csv(const std::vector<AnomalyRegion>& regions, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << "region_id,s,t\n";
    for (size_t i = 0; i < regions.size(); ++i)
        for (const CellId& c : regions[i].cells) out << i << ',' << c.s << ',' << c.t << '\n';
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

std::string state_csv_name(ScaleId sc) {
    return "states_l" + std::to_string(sc.l) + "_m" + std::to_string(sc.m) + ".csv";
}

std::string truth_csv_name(ScaleId sc) {
    return "truth_l" + std::to_string(sc.l) + "_m" + std::to_string(sc.m) + ".csv";
}

std::string regions_csv_name(ScaleId sc) {
    return "regions_l" + std::to_string(sc.l) + "_m" + std::to_string(sc.m) + ".csv";
}

}  // namespace msmrf
