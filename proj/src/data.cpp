#include "msmrf/data.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "msmrf/errors.hpp"

namespace msmrf {

ObservationSet::ObservationSet(const MultiScaleLattice& lat) {
    n_temporal_ = lat.num_temporal_scales();
    grids_.reserve(lat.num_scales());
    for (int i = 0; i < lat.num_scales(); ++i) {
        const ScaleId sc = lat.scale_at(i);
        grids_.emplace_back(lat.spatial_size(sc.l), lat.temporal_size(sc.m));
    }
}

namespace {

CsvOptions sidecar_options(const std::string& path) {
    CsvOptions opts;
    const std::string sidecar = path + ".json";
    if (!std::filesystem::exists(sidecar)) return opts;
    std::ifstream in(sidecar);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid sidecar JSON " + sidecar + ": " + e.what());
    }
    opts.missing_token = j.value("missing_token", opts.missing_token);
    const std::string d = j.value("delimiter", std::string(1, opts.delimiter));
    if (d.size() != 1) throw ConfigError("sidecar delimiter must be a single character");
    opts.delimiter = d[0];
    return opts;
}

}  // namespace

ObservationSet load_observations(const std::string& path, const MultiScaleLattice& lat) {
    return load_observations(path, lat, sidecar_options(path));
}

ObservationSet load_observations(const std::string& path, const MultiScaleLattice& lat,
                                 const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open data file: " + path);

    ObservationSet obs(lat);
    ScaleGrid& base = obs.grid(ScaleId{0, 0});
    const int want_cols = base.times;

    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (row >= base.locations)
            throw ShapeError(path + ": more rows than base-scale locations (" +
                             std::to_string(base.locations) + ")");
        int col = 0;
        size_t pos = 0;
        while (pos <= line.size()) {
            size_t end = line.find(opts.delimiter, pos);
            if (end == std::string::npos) end = line.size();
            std::string_view tok(line.data() + pos, end - pos);
            // trim spaces
            while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t'))
                tok.remove_prefix(1);
            while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
            if (col >= want_cols)
                throw ShapeError(path + ": row " + std::to_string(row) + " has more than " +
                                 std::to_string(want_cols) + " columns");
            if (tok == opts.missing_token || tok.empty()) {
                base.set_missing(row, col);
            } else {
                double v = 0.0;
                const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
                if (ec != std::errc() || p != tok.data() + tok.size())
                    throw ParseError(path + ": non-numeric cell '" + std::string(tok) +
                                     "' at row " + std::to_string(row) + ", column " +
                                     std::to_string(col));
                base.set(row, col, v);
            }
            ++col;
            if (end == line.size()) break;
            pos = end + 1;
        }
        if (col != want_cols)
            throw ShapeError(path + ": row " + std::to_string(row) + " has " +
                             std::to_string(col) + " columns, expected " +
                             std::to_string(want_cols));
        ++row;
    }
    if (row != base.locations)
        throw ShapeError(path + ": " + std::to_string(row) + " rows, expected " +
                         std::to_string(base.locations));
    return obs;
}

namespace {

// Collapses the time axis of `fine` one temporal step using the lattice's
// child groups at temporal scale m_coarse.
ScaleGrid aggregate_temporal(const ScaleGrid& fine, const MultiScaleLattice& lat, int m_coarse) {
    ScaleGrid coarse(fine.locations, lat.temporal_size(m_coarse));
    for (int s = 0; s < coarse.locations; ++s) {
        for (int t = 0; t < coarse.times; ++t) {
            double sum = 0.0;
            int n = 0;
            for (int tc : lat.children_temporal(m_coarse, t)) {
                if (fine.is_missing(s, tc)) continue;
                sum += fine.at(s, tc);
                ++n;
            }
            if (n == 0)
                coarse.set_missing(s, t);
            else
                coarse.set(s, t, sum / n);
        }
    }
    return coarse;
}

ScaleGrid aggregate_spatial(const ScaleGrid& fine, const MultiScaleLattice& lat, int l_coarse) {
    ScaleGrid coarse(lat.spatial_size(l_coarse), fine.times);
    for (int s = 0; s < coarse.locations; ++s) {
        const auto& kids = lat.children_spatial(l_coarse, s);
        for (int t = 0; t < coarse.times; ++t) {
            double sum = 0.0;
            int n = 0;
            for (int sc : kids) {
                if (fine.is_missing(sc, t)) continue;
                sum += fine.at(sc, t);
                ++n;
            }
            if (n == 0)
                coarse.set_missing(s, t);
            else
                coarse.set(s, t, sum / n);
        }
    }
    return coarse;
}

}  // namespace

ObservationSet aggregate(const ObservationSet& base, const MultiScaleLattice& lat) {
    ObservationSet out = base;
    // Temporal sweeps along l = 0, then spatial sweeps for every m.
    for (int m = 1; m < lat.num_temporal_scales(); ++m)
        out.grid(ScaleId{0, m}) = aggregate_temporal(out.grid(ScaleId{0, m - 1}), lat, m);
    for (int l = 1; l < lat.num_spatial_scales(); ++l)
        for (int m = 0; m < lat.num_temporal_scales(); ++m)
            out.grid(ScaleId{l, m}) = aggregate_spatial(out.grid(ScaleId{l - 1, m}), lat, l);
    out.mark_aggregated();
    return out;
}

void write_observations_csv(const ScaleGrid& grid, const std::string& path,
                            const CsvOptions& opts) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out.precision(17);
    for (int s = 0; s < grid.locations; ++s) {
        for (int t = 0; t < grid.times; ++t) {
            if (t) out << opts.delimiter;
            if (grid.is_missing(s, t))
                out << opts.missing_token;
            else
                out << grid.at(s, t);
        }
        out << '\n';
    }
}

}  // namespace msmrf
