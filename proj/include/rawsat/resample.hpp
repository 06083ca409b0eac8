#pragma once

#include <cstddef>

#include "rawsat/raster.hpp"

namespace rawsat {

/// Mean of each factor x factor block; gsd scales by factor. Throws
/// SchemaError when factor does not divide both dimensions.
Raster downsample_block(const Raster& r, std::size_t factor);

// Separable Catmull-Rom (a = -0.5) upsampling. Output pixel centers map to
// input coordinate (x + 0.5) / factor - 0.5; out-of-range taps clamp to the
// border sample. Accumulation is in double so partition of unity holds
// exactly for constant input.
Raster upsample_bicubic(const Raster& r, std::size_t factor);

/// Catmull-Rom weights for fractional offset t in [0, 1), taps at -1..2.
void catmull_rom_weights(double t, double w[4]);

/// Whole-sample symmetric index: ... 2 1 | 0 1 2 ... n-1 | n-2 ...
std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n);
/// Half-sample symmetric index: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
std::ptrdiff_t symmetric_index(std::ptrdiff_t i, std::ptrdiff_t n);

inline std::ptrdiff_t clamp_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

}  // namespace rawsat
