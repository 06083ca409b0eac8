#pragma once

#include <vector>

#include "rawsat/raster.hpp"

namespace rawsat {

/// Gaussian optical transfer function m^(4 f^2), f in cycles/sample.
struct MtfSpec {
  double mtf_at_nyquist = 0.3;
  int kernel_half_width = 8;

  void validate() const;
  double target_response(double f) const;

  bool operator==(const MtfSpec&) const = default;
};

// Symmetric FIR taps h[-hw..hw] approximating the target response. Starting
// from the truncated cosine series of the target, the minimum-L2 correction
// is applied that pins the response to exactly 1 at DC and exactly
// mtf_at_nyquist at f = 0.5. mtf_at_nyquist == 1 yields a unit impulse.
std::vector<double> mtf_kernel(const MtfSpec& spec);

/// DTFT of symmetric taps at frequency f (cycles/sample).
double kernel_response(const std::vector<double>& taps, double f);

// Separable convolution. Borders use half-sample symmetric extension: the
// mirrored 2N-periodic signal has the same mean as the image, so a kernel
// with unit DC gain preserves the image mean, and the DCT-II diagonalizes
// the operation (see wiener.hpp).
Raster apply_mtf(const Raster& r, const MtfSpec& spec);

/// Same convolution with explicit taps (odd length).
Raster convolve_separable(const Raster& r, const std::vector<float>& taps);

}  // namespace rawsat
