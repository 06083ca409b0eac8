#pragma once

#include <optional>

#include "rawsat/mtf.hpp"
#include "rawsat/noise.hpp"
#include "rawsat/raster.hpp"

namespace rawsat {

struct WienerConfig {
  MtfSpec mtf;
  double nsr = 0;  // k, added to |H|^2
  void validate() const;
};

// Frequency-domain filter H / (H^2 + k) with H the separable response of
// the MTF kernel. The transform is a 2-D DCT-II, which diagonalizes
// convolution with half-sample symmetric borders exactly (the same borders
// apply_mtf uses), so k = 0 inverts apply_mtf up to float rounding for any
// image size.
Raster wiener_restore(const Raster& r, const WienerConfig& cfg);

// k = mean noise variance / signal variance, where the signal variance is
// the image variance minus the mean noise variance predicted by `noise`.
double estimate_nsr(const Raster& r, const NoiseModel& noise);

}  // namespace rawsat
