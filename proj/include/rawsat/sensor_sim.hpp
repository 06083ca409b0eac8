#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rawsat/mtf.hpp"
#include "rawsat/noise.hpp"
#include "rawsat/raster.hpp"

namespace rawsat {

/// Bilinear translation: out(x, y) = in(x - dx, y - dy), coordinates clamped.
Raster misregister(const Raster& r, double dx, double dy);

/// Uniform quantizer to 2^bits - 1 codes over [0, radiometric_max].
Raster quantize(const Raster& r, int bits, double radiometric_max);

enum class Stage { Downsample, Misregister, Mtf, Noise, Quantize };

const char* stage_name(Stage s);
Stage stage_from_name(const std::string& name);

// Defaults stand in for sensor parameters that are not published: the noise
// model comes from anchors (10, SNR 20) and (1000, SNR 200).
struct BandDegradation {
  MtfSpec mtf;
  NoiseModel noise{0.025, 0.0, NoiseAnchor{10, 20}, NoiseAnchor{1000, 200}};
  double dx = 0;
  double dy = 0;

  bool operator==(const BandDegradation&) const = default;
};

struct DegradationConfig {
  std::size_t pre_downsample_factor = 4;
  BandDegradation defaults;
  // Overrides keyed by source band name.
  std::map<std::string, BandDegradation> bands;
  int quant_bits = 12;
  // Unset: 99.9th percentile of the source PAN band.
  std::optional<double> radiometric_max;
  std::vector<Stage> stage_order{Stage::Downsample, Stage::Misregister, Stage::Mtf, Stage::Noise,
                                 Stage::Quantize};
  std::uint64_t seed = 0;

  const BandDegradation& for_band(const std::string& name) const;
  void validate() const;

  nlohmann::json to_json() const;
  static DegradationConfig from_json(const nlohmann::json& j);

  bool operator==(const DegradationConfig&) const = default;
};

/// Output band name for a degraded source band ("PAN" -> "PAN_raw").
std::string raw_band_name(const std::string& source);

// Degrades the PAN and XS bands of g into "<band>_raw" bands following
// cfg.stage_order. Downsampling always runs first when it is not listed
// (factor 1 disables it); misregistration applies to XS bands only.
// Annotations are rescaled to the new PAN grid and a "degrade" record is
// appended to the provenance.
Granule degrade(const Granule& g, const DegradationConfig& cfg);

}  // namespace rawsat
