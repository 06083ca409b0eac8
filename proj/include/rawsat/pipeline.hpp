#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rawsat/detmetrics.hpp"
#include "rawsat/pansharp.hpp"
#include "rawsat/png_io.hpp"
#include "rawsat/restoration.hpp"
#include "rawsat/sensor_sim.hpp"
#include "rawsat/synthdata.hpp"
#include "rawsat/tiling.hpp"

namespace rawsat {

enum class Variant { Raw, Restored };
/// "raw-sim" | "L1-sim"
const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // raw | restored

struct PipelineConfig {
  std::vector<std::filesystem::path> inputs;  // granule directories
  std::vector<SceneSpec> synth;               // generated granules, after inputs
  DegradationConfig degrade;
  RestoreConfig restore;
  BroveyWeights pansharp;
  TileSpec tile;
  std::optional<ClassSelection> classes;
  SplitFractions split;
  std::optional<LinearScale> png_scale;  // unset: [0, largest radiometric_max]
  EvalConfig evaluate;
  std::filesystem::path output;
  bool overwrite = false;
  std::uint64_t seed = 0;

  // Checks every stage config and that referenced paths exist. Throws
  // ConfigError before anything is written.
  void validate(Variant variant) const;
  nlohmann::json to_json() const;
  // Relative paths are resolved against base_dir.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
};

// TOML text or file -> config. Top level: seed, output, overwrite, inputs;
// tables [degrade], [restore], [pansharp], [tile], [classes], [export],
// [evaluate], and an array of tables [[synth]].
PipelineConfig parse_pipeline_config(const std::string& toml_text, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& toml_file);

/// Converts a TOML document to the equivalent JSON value.
nlohmann::json toml_to_json(const std::string& toml_text);

// Per-granule seed used by the degradation stage, so granules sharing a
// global seed still get distinct noise.
std::uint64_t granule_seed(std::uint64_t seed, const std::string& granule_id);

// degrade -> (restore iff variant is Restored) -> pansharpen -> tile ->
// export. Output is built in a sibling temporary directory and renamed into
// place on success; on failure it is removed and the error names the stage.
// The returned manifest (also written to output/manifest.json) carries the
// variant, executed stages, resolved config and per-granule provenance.
nlohmann::json run_pipeline(const PipelineConfig& cfg, Variant variant);

}  // namespace rawsat
