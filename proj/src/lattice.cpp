#include "msmrf/lattice.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "msmrf/errors.hpp"

namespace msmrf {

namespace {

using nlohmann::json;

// Parses one coarsening step: either {"uniform": k} or an explicit list of
// child-index groups, parent index = position in the list.
std::vector<std::vector<int>> parse_groups(const json& step, int fine_size, int coarse_size,
                                           const std::string& what) {
    std::vector<std::vector<int>> groups;
    if (step.is_object() && step.contains("uniform")) {
        const int k = step.at("uniform").get<int>();
        if (k <= 0) throw ConfigError(what + ": uniform group size must be positive");
        if (fine_size % k != 0 || fine_size / k != coarse_size)
            throw PartitionError(what + ": uniform grouping of " + std::to_string(k) +
                                 " does not map " + std::to_string(fine_size) + " cells onto " +
                                 std::to_string(coarse_size));
        groups.resize(coarse_size);
        for (int p = 0; p < coarse_size; ++p) {
            groups[p].resize(k);
            for (int j = 0; j < k; ++j) groups[p][j] = p * k + j;
        }
        return groups;
    }
    if (!step.is_array())
        throw ConfigError(what + ": coarsening step must be {\"uniform\": k} or a group list");
    groups = step.get<std::vector<std::vector<int>>>();
    if (static_cast<int>(groups.size()) != coarse_size)
        throw PartitionError(what + ": " + std::to_string(groups.size()) +
                             " groups for coarse size " + std::to_string(coarse_size));
    std::vector<char> seen(fine_size, 0);
    for (const auto& g : groups) {
        if (g.empty()) throw PartitionError(what + ": empty child group");
        for (int c : g) {
            if (c < 0 || c >= fine_size)
                throw PartitionError(what + ": child index " + std::to_string(c) +
                                     " out of range");
            if (seen[c]) throw PartitionError(what + ": overlapping child groups at index " +
                                              std::to_string(c));
            seen[c] = 1;
        }
    }
    for (int c = 0; c < fine_size; ++c)
        if (!seen[c])
            throw PartitionError(what + ": child groups do not cover index " + std::to_string(c));
    return groups;
}

std::vector<std::vector<int>> grid_neighbors(const json& grid) {
    const int rows = grid.at("rows").get<int>();
    const int cols = grid.at("cols").get<int>();
    if (rows <= 0 || cols <= 0) throw ConfigError("grid rows/cols must be positive");
    int connectivity = grid.value("connectivity", 4);
    if (connectivity != 4 && connectivity != 8)
        throw ConfigError("grid connectivity must be 4 or 8");

    std::vector<char> active(static_cast<size_t>(rows) * cols, 1);
    if (grid.contains("mask")) {
        const auto mask = grid.at("mask").get<std::vector<int>>();
        if (static_cast<int>(mask.size()) != rows * cols)
            throw ConfigError("grid mask length must equal rows*cols");
        for (size_t i = 0; i < mask.size(); ++i) active[i] = mask[i] != 0;
    }

    // Active cells get location indices in row-major order.
    std::vector<int> loc_of(static_cast<size_t>(rows) * cols, -1);
    int n = 0;
    for (int i = 0; i < rows * cols; ++i)
        if (active[i]) loc_of[i] = n++;

    static const int d4[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    static const int d8[8][2] = {{-1, 0},  {1, 0},  {0, -1}, {0, 1},
                                 {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
    const auto* dirs = connectivity == 4 ? d4 : d8;
    const int ndirs = connectivity;

    std::vector<std::vector<int>> nb(n);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int cell = r * cols + c;
            if (!active[cell]) continue;
            for (int d = 0; d < ndirs; ++d) {
                const int rr = r + dirs[d][0];
                const int cc = c + dirs[d][1];
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                const int other = rr * cols + cc;
                if (active[other]) nb[loc_of[cell]].push_back(loc_of[other]);
            }
        }
    }
    for (auto& v : nb) std::sort(v.begin(), v.end());
    return nb;
}

}  // namespace

MultiScaleLattice MultiScaleLattice::build(const nlohmann::json& config) {
    MultiScaleLattice lat;
    if (!config.contains("spatial_scales") || !config.contains("temporal_scales"))
        throw ConfigError("lattice config requires spatial_scales and temporal_scales");

    lat.months_per_year_ = config.value("months_per_year", 12);
    if (lat.months_per_year_ < 1) throw ConfigError("months_per_year must be >= 1");

    for (const auto& sc : config.at("spatial_scales")) {
        std::vector<std::vector<int>> nb;
        int size = 0;
        if (sc.contains("grid")) {
            nb = grid_neighbors(sc.at("grid"));
            size = static_cast<int>(nb.size());
            if (sc.contains("size") && sc.at("size").get<int>() != size)
                throw ConfigError("spatial scale size disagrees with grid/mask");
        } else {
            size = sc.at("size").get<int>();
            if (sc.contains("neighbors")) {
                nb = sc.at("neighbors").get<std::vector<std::vector<int>>>();
                if (static_cast<int>(nb.size()) != size)
                    throw ConfigError("neighbor list length must equal scale size");
            } else {
                nb.assign(size, {});
            }
        }
        if (size <= 0) throw ConfigError("empty spatial scale");
        for (auto& v : nb) std::sort(v.begin(), v.end());
        lat.spatial_sizes_.push_back(size);
        lat.neighbors_.push_back(std::move(nb));
    }

    for (const auto& sc : config.at("temporal_scales")) {
        const int size = sc.at("size").get<int>();
        if (size <= 0) throw ConfigError("empty temporal scale");
        lat.temporal_sizes_.push_back(size);
    }
    if (lat.spatial_sizes_.empty() || lat.temporal_sizes_.empty())
        throw ConfigError("at least one spatial and one temporal scale required");

    const auto spatial_steps = config.value("spatial_groups", json::array());
    if (static_cast<int>(spatial_steps.size()) != lat.num_spatial_scales() - 1)
        throw ConfigError("spatial_groups must have one entry per coarsening step");
    for (int l = 0; l + 1 < lat.num_spatial_scales(); ++l) {
        auto groups = parse_groups(spatial_steps[l], lat.spatial_sizes_[l],
                                   lat.spatial_sizes_[l + 1],
                                   "spatial step " + std::to_string(l));
        std::vector<int> parent(lat.spatial_sizes_[l]);
        for (int p = 0; p < static_cast<int>(groups.size()); ++p) {
            std::sort(groups[p].begin(), groups[p].end());
            for (int c : groups[p]) parent[c] = p;
        }
        lat.spatial_parent_.push_back(std::move(parent));
        lat.spatial_children_.push_back(std::move(groups));
    }

    const auto temporal_steps = config.value("temporal_groups", json::array());
    if (static_cast<int>(temporal_steps.size()) != lat.num_temporal_scales() - 1)
        throw ConfigError("temporal_groups must have one entry per coarsening step");
    for (int m = 0; m + 1 < lat.num_temporal_scales(); ++m) {
        auto groups = parse_groups(temporal_steps[m], lat.temporal_sizes_[m],
                                   lat.temporal_sizes_[m + 1],
                                   "temporal step " + std::to_string(m));
        std::vector<int> parent(lat.temporal_sizes_[m]);
        for (int p = 0; p < static_cast<int>(groups.size()); ++p) {
            std::sort(groups[p].begin(), groups[p].end());
            for (int c : groups[p]) parent[c] = p;
        }
        lat.temporal_parent_.push_back(std::move(parent));
        lat.temporal_children_.push_back(std::move(groups));
    }

    lat.validate();
    return lat;
}

MultiScaleLattice MultiScaleLattice::build_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open lattice config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid JSON in " + path + ": " + e.what());
    }
    return build(j);
}

void MultiScaleLattice::validate() const {
    for (int l = 0; l < num_spatial_scales(); ++l) {
        const int n = spatial_sizes_[l];
        for (int s = 0; s < n; ++s) {
            for (int s2 : neighbors_[l][s]) {
                if (s2 < 0 || s2 >= n)
                    throw TopologyError("neighbor index out of range at spatial scale " +
                                        std::to_string(l));
                if (s2 == s)
                    throw TopologyError("self-loop at location " + std::to_string(s) +
                                        ", spatial scale " + std::to_string(l));
                const auto& back = neighbors_[l][s2];
                if (!std::binary_search(back.begin(), back.end(), s))
                    throw TopologyError("asymmetric neighbor list: " + std::to_string(s) +
                                        " -> " + std::to_string(s2) + " at spatial scale " +
                                        std::to_string(l));
            }
        }
    }
}

int MultiScaleLattice::spatial_size(int l) const {
    check_spatial_scale(l);
    return spatial_sizes_[l];
}

int MultiScaleLattice::temporal_size(int m) const {
    check_temporal_scale(m);
    return temporal_sizes_[m];
}

void MultiScaleLattice::check_spatial_scale(int l) const {
    if (l < 0 || l >= num_spatial_scales())
        throw BoundsError("spatial scale " + std::to_string(l) + " out of range");
}

void MultiScaleLattice::check_temporal_scale(int m) const {
    if (m < 0 || m >= num_temporal_scales())
        throw BoundsError("temporal scale " + std::to_string(m) + " out of range");
}

const std::vector<int>& MultiScaleLattice::neighbors(int l, int s) const {
    check_spatial_scale(l);
    if (s < 0 || s >= spatial_sizes_[l])
        throw BoundsError("location " + std::to_string(s) + " out of range at spatial scale " +
                          std::to_string(l));
    return neighbors_[l][s];
}

int MultiScaleLattice::parent_spatial(int l, int s) const {
    check_spatial_scale(l);
    if (l + 1 >= num_spatial_scales())
        throw ScaleBoundaryError("no spatial parent above scale " + std::to_string(l));
    if (s < 0 || s >= spatial_sizes_[l]) throw BoundsError("location out of range");
    return spatial_parent_[l][s];
}

const std::vector<int>& MultiScaleLattice::children_spatial(int l, int s) const {
    check_spatial_scale(l);
    if (l == 0) throw ScaleBoundaryError("no spatial children below scale 0");
    if (s < 0 || s >= spatial_sizes_[l]) throw BoundsError("location out of range");
    return spatial_children_[l - 1][s];
}

int MultiScaleLattice::parent_temporal(int m, int t) const {
    check_temporal_scale(m);
    if (m + 1 >= num_temporal_scales())
        throw ScaleBoundaryError("no temporal parent above scale " + std::to_string(m));
    if (t < 0 || t >= temporal_sizes_[m]) throw BoundsError("time index out of range");
    return temporal_parent_[m][t];
}

const std::vector<int>& MultiScaleLattice::children_temporal(int m, int t) const {
    check_temporal_scale(m);
    if (m == 0) throw ScaleBoundaryError("no temporal children below scale 0");
    if (t < 0 || t >= temporal_sizes_[m]) throw BoundsError("time index out of range");
    return temporal_children_[m - 1][t];
}

}  // namespace msmrf
