#pragma once

#include "map_solver.hpp"
#include "rawj.hpp"

namespace buqo {

json map_result_json(const MapResult &res);

/// RAWJ image; the header's "map" object carries the solve metadata.
void save_map_result(const fs::path &path, const MapResult &res);
MapResult load_map_result(const fs::path &path);

} // namespace buqo
