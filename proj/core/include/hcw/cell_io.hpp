#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "hcw/cell.hpp"

namespace hcw {

// Cell file schema (JSON):
//
//   {
//     "dimension": 2,
//     "period": [3, 3],                  // torus side lengths
//     "astral_sites": [[1, 1]],          // ordered; index j = 1..M
//     "p0": [{"site": [0, 0], "offset": [1, 0], "value": 0.25}, ...],
//     "D":  [ ...same record shape... ], // optional, default empty
//     "V":  [ ...same record shape... ], // optional, default empty
//     "m": 1.0,                          // absorption intensity, >= 0
//     "range": 1                         // optional, max |offset|_inf
//   }
//
// Values are JSON numbers or exact rationals written as strings ("1/4").
// Instead of explicit records a file may name a preset:
//
//   {"preset": "appendix2", "K": 1.0, "hold": 0.0,
//    "bulk_exchange": 0.0, "astral_exchange": 0.0, "m": 0.0}

CellConfig parse_cell_config(std::string_view json_text);
CellConfig load_cell_config(const std::filesystem::path& path);

/// Serialises a configuration as explicit records (never as a preset).
std::string dump_cell_config(const CellConfig& config);

}  // namespace hcw
