#pragma once

#include <string>
#include <vector>

#include "rawsat/raster.hpp"

namespace rawsat {

struct BroveyWeights {
  std::vector<double> w;  // empty: all ones
  /// Weights for `bands` bands; throws ConfigError when invalid.
  std::vector<float> resolve(std::size_t bands) const;
};

struct BroveyResult {
  std::vector<Raster> bands;
  std::size_t guarded_pixels = 0;
  float eps = 0;
};

// F_i = M_i / (sum_j w_j M_j) * P with M_j the XS bands upsampled by
// `ratio` (bicubic, clamped at 0). Pixels whose weighted sum is <= eps = 1e-6 *
// radiometric_scale are set to 0 in every band and counted.
BroveyResult brovey(const Raster& pan, const std::vector<const Raster*>& xs, const BroveyWeights& weights,
                    std::size_t ratio, double radiometric_scale);

/// "PANSHARP_<band>" with a trailing "_raw" dropped ("R_raw" -> "PANSHARP_R").
std::string pansharp_band_name(const std::string& xs_band);

// Fuses the XS bands with the raw PAN band, or with the restored PAN band
// (restored_band_name(pan_band)) when use_restored_pan is set. The
// radiometric scale for the guard comes from the last "degrade" record,
// falling back to the 99.9th percentile of the chosen PAN band.
Granule pansharpen_granule(const Granule& g, const BroveyWeights& weights, bool use_restored_pan);

}  // namespace rawsat
