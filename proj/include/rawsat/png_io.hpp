#pragma once

#include <filesystem>
#include <vector>

#include "rawsat/raster.hpp"

namespace rawsat {

/// Linear mapping of [lo, hi] onto the full code range of the PNG.
struct LinearScale {
  double lo = 0;
  double hi = 1;

  nlohmann::json to_json() const { return {{"lo", lo}, {"hi", hi}}; }
};

// Writes 1 band as grayscale or 3 bands as RGB, at bit depth 8 or 16.
// Values outside [lo, hi] saturate.
void write_png(const std::filesystem::path& path, const std::vector<const Raster*>& bands,
               int bit_depth, LinearScale scale);

// Reads an 8/16-bit grayscale or RGB PNG (alpha is dropped) and maps codes
// back to [lo, hi]. Returns one raster per color channel.
std::vector<Raster> read_png(const std::filesystem::path& path, LinearScale scale, double gsd = 1.0);

}  // namespace rawsat
