#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "rawsat/mtf.hpp"
#include "rawsat/noise.hpp"
#include "rawsat/raster.hpp"

namespace rawsat {

enum class RestoreMethod { None, Wiener, Edsr };
const char* restore_method_name(RestoreMethod m);
RestoreMethod restore_method_from_name(const std::string& name);

struct RestoreConfig {
  RestoreMethod method = RestoreMethod::Wiener;
  std::filesystem::path weights;  // EDSW1 file, edsr only
  // Wiener inputs. Unset values are taken from the granule's last "degrade"
  // record for its PAN band; nsr then comes from estimate_nsr.
  std::optional<MtfSpec> mtf;
  std::optional<NoiseModel> noise;
  std::optional<double> nsr;
  /// Throws ConfigError (e.g. missing weight file) before any processing.
  void validate() const;
};

/// "PAN_raw" -> "PAN_restored"; other names get "_restored" appended.
std::string restored_band_name(const std::string& pan_band);

// Adds the restored PAN band next to the raw one. Dimensions and GSD are
// unchanged; provenance records the method and the resolved parameters.
Granule restore_granule(const Granule& g, const RestoreConfig& cfg);

}  // namespace rawsat
