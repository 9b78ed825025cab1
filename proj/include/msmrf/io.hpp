#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "msmrf/evaluate.hpp"
#include "msmrf/model.hpp"

namespace msmrf {

// State-label CSV: rows = locations, columns = times, integer labels,
// 0 marks missing cells.
void write_state_csv(const StateGrid& z, const std::string& path);
StateGrid read_state_csv(const std::string& path);

// Region summary CSV (one row per region) and optional cell-membership CSV
// keyed by region id.
void write_regions_csv(const std::vector<AnomalyRegion>& regions, const std::string& path);
void write_region_cells_csv(const std::vector<AnomalyRegion>& regions, const std::string& path);

void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

// FNV-1a 64-bit file checksum, hex-encoded.
std::string file_checksum(const std::string& path);

std::string state_csv_name(ScaleId sc);
std::string truth_csv_name(ScaleId sc);
std::string regions_csv_name(ScaleId sc);

}  // namespace msmrf
