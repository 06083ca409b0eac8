#pragma once

#include <filesystem>

#include "rawsat/raster.hpp"

namespace rawsat {

// Container layout: <dir>/meta.json plus one "<band>.bin" per band holding
// row-major little-endian float32 samples without a header.
Granule read_granule(const std::filesystem::path& dir);
void write_granule(const Granule& g, const std::filesystem::path& dir);

nlohmann::json granule_meta(const Granule& g);

nlohmann::json to_json(const Annotation& a);
Annotation annotation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProvenanceRecord& p);
ProvenanceRecord provenance_from_json(const nlohmann::json& j);

}  // namespace rawsat
