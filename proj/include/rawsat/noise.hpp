#pragma once

#include <optional>
#include <vector>

#include "rawsat/raster.hpp"
#include "rawsat/rng.hpp"

namespace rawsat {

/// Reference point of the sensor: luminance and linear SNR (L / sigma).
struct NoiseAnchor {
  double luminance = 0;
  double snr = 1;

  bool operator==(const NoiseAnchor&) const = default;
};

// Signal-dependent noise: sigma^2(L) = alpha * L + beta.
struct NoiseModel {
  NoiseModel() = default;
  NoiseModel(double a, double b, std::optional<NoiseAnchor> d = std::nullopt,
             std::optional<NoiseAnchor> br = std::nullopt)
      : alpha(a), beta(b), dark(d), bright(br) {}
  double alpha = 0;
  double beta = 0;
  std::optional<NoiseAnchor> dark;
  std::optional<NoiseAnchor> bright;

  double variance(double luminance) const { return alpha * luminance + beta; }

  /// Throws ConfigError naming the offending luminance when the variance
  /// turns negative anywhere in [0, radiometric_max].
  void check_range(double radiometric_max) const;

  bool operator==(const NoiseModel&) const = default;
};

/// dB -> linear amplitude ratio (20 log10 convention).
double snr_from_db(double db);

// Solves alpha * L + beta = (L / SNR)^2 at both anchors. The model is then
// checked over [0, radiometric_max]; when radiometric_max is not given the
// brighter anchor luminance is used.
NoiseModel fit_noise_params(NoiseAnchor dark, NoiseAnchor bright,
                            std::optional<double> radiometric_max = std::nullopt);

// out = max(0, r + n) with n ~ N(0, alpha * r + beta). Pixel i uses normal i
// of `rng` counted from its current position, so the result does not depend
// on how rows are split across threads.
Raster apply_noise(const Raster& r, const NoiseModel& m, const Rng& rng);

struct FlatPatch {
  const Raster* raster = nullptr;
  // Uniform patches use the sample variance directly. Otherwise the noise
  // variance is taken from horizontal first differences (var(d) / 2), which
  // ignores slowly varying signal.
  bool known_uniform = true;
};

struct NoiseEstimate {
  NoiseModel model;
  std::vector<double> means;
  std::vector<double> variances;
};

// Weighted least-squares line through (mean, variance) of each patch, with
// weights 1 / sigma^4 refined from the previous fit (the sampling variance of
// a variance estimate scales with sigma^4). Needs at least two distinct means.
NoiseEstimate estimate_noise(const std::vector<FlatPatch>& patches);

}  // namespace rawsat
