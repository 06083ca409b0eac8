#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rawsat/png_io.hpp"
#include "rawsat/raster.hpp"

namespace rawsat {

enum class TileMode { Grid, ObjectCentered };
const char* tile_mode_name(TileMode m);
TileMode tile_mode_from_name(const std::string& name);

struct TileSpec {
  std::size_t patch_size = 256;
  TileMode mode = TileMode::ObjectCentered;
  double offset_fraction = 0.3;
  double min_visibility = 1.0;  // grid mode only
  std::uint64_t seed = 0;
  // Bands cut into each tile, all on the PAN grid. Empty: the PANSHARP_*
  // bands when present, else the PAN band.
  std::vector<std::string> bands;
  void validate() const;
  nlohmann::json to_json() const;
  static TileSpec from_json(const nlohmann::json& j);
};

struct Tile {
  std::vector<Raster> image;
  std::size_t x0 = 0, y0 = 0;
  std::vector<Annotation> labels;  // patch coordinates
  std::string source_granule;
  std::optional<std::size_t> seed_annotation;  // object-centered mode
};

struct TileWarning {
  std::string granule;
  std::size_t annotation = 0;
  std::string message;
};

struct TilingResult {
  std::vector<Tile> tiles;
  std::vector<TileWarning> warnings;
};

/// Bands tiled for g under spec (resolves the empty default).
std::vector<std::string> tile_bands(const Granule& g, const TileSpec& spec);

// Row-major non-overlapping grid; when the patch does not divide a
// dimension, one extra column/row of patches is anchored to the far edge.
// Annotations are clipped to the patch and kept when the clipped area is at
// least min_visibility of the original.
TilingResult tile_grid(const Granule& g, const TileSpec& spec);

// One patch per annotation whose pixel footprint [floor(xmin), ceil(xmax)]
// fits in patch_size. The patch center is the box center plus a uniform
// offset in [-f, f] * patch_size per axis (stream derived from seed, granule
// id and annotation index); the origin is then clamped so the patch contains
// the box and stays inside the granule. Labels are all annotations fully
// inside the patch. Oversized annotations produce a warning instead.
TilingResult tile_object_centered(const Granule& g, const TileSpec& spec);

TilingResult make_tiles(const Granule& g, const TileSpec& spec);

// Classes to keep and their dense new ids (ordered by original id).
struct ClassFilter {
  std::map<int, int> remap;                // old id -> new id
  std::map<int, std::string> names;        // new id -> name
  nlohmann::json to_json() const;
};

struct ClassKeep {
  std::vector<int> ids;
};
struct ClassTopK {
  std::size_t k = 6;
};
using ClassSelection = std::variant<ClassKeep, ClassTopK>;

// Top-k ranks classes by median box area over all given granules (ties:
// lower class id first).
ClassFilter select_classes(const std::vector<const Granule*>& granules, const ClassSelection& sel);
/// Drops annotations outside the filter and re-indexes the rest.
Granule apply_class_filter(const Granule& g, const ClassFilter& f);
Granule filter_classes(const Granule& g, const ClassSelection& sel);

struct SplitFractions {
  double train = 1, val = 0, test = 0;
  void validate() const;
};

/// "train" | "val" | "test" as a pure function of (granule id, seed).
std::string split_for_granule(const std::string& granule_id, const SplitFractions& f, std::uint64_t seed);

struct ExportOptions {
  SplitFractions split;
  std::uint64_t seed = 0;
  LinearScale scale;  // radiance range mapped onto the 16-bit code range
  std::map<int, std::string> class_names;
  int label_decimals = 6;
};

/// "class cx cy w h" line for a box in a square patch.
std::string yolo_line(const Annotation& a, std::size_t patch_size, int decimals = 6);

// Writes images/<split>/<name>.png (16-bit, 1 or 3 bands) and
// labels/<split>/<name>.txt for every tile, plus manifest.json; returns the
// manifest. Each manifest entry also carries the tile origin and the labels
// at full double precision.
nlohmann::json export_dataset(const std::vector<Tile>& tiles, const std::filesystem::path& dir,
                              const ExportOptions& opt);
void write_manifest(const nlohmann::json& manifest, const std::filesystem::path& dir);

}  // namespace rawsat
