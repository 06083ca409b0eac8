#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rawsat/raster.hpp"

namespace rawsat {

// Desk-scale stand-in scene: smooth textured sea plus bright elongated
// targets. PAN is rendered at full resolution; the XS bands are the PAN
// block-averaged by `ratio` and scaled by one tint per band.
struct SceneSpec {
  std::string id = "synth";
  std::size_t width = 512, height = 512;  // PAN pixels, multiples of ratio
  std::size_t ratio = 4;
  double gsd = 0.5;
  double background_mean = 400;
  double texture_amplitude = 25;  // std of the background texture
  double texture_scale = 6;       // Gaussian correlation length, pixels
  std::size_t object_count = 8;
  double size_min = 12, size_max = 60;  // object length, pixels
  double aspect_min = 0.25, aspect_max = 0.45;
  double contrast_min = 150, contrast_max = 600;
  bool rotate = true;  // false: axis-aligned rectangles only
  int n_classes = 4;
  std::vector<std::string> xs_bands{"R", "G", "B"};
  std::vector<double> tints{0.85, 1.0, 1.15};
  std::uint64_t seed = 0;
  void validate() const;
  nlohmann::json to_json() const;
  static SceneSpec from_json(const nlohmann::json& j);
};

// Annotations are the exact pixel bounding boxes of the painted objects;
// class c objects are drawn from the c-th slice of the size range, so class
// id increases with size. Provenance holds a single "synth" record.
Granule synth_granule(const SceneSpec& spec);

}  // namespace rawsat
