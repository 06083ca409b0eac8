#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rawsat {

struct BBox {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  bool valid() const { return xmin < xmax && ymin < ymax; }
  bool operator==(const BBox&) const = default;
};

struct Annotation {
  int class_id = 0;
  std::string class_name;
  BBox bbox;

  bool operator==(const Annotation&) const = default;
};

/// Single-band row-major float image with its ground sample distance.
class Raster {
 public:
  Raster() = default;
  Raster(std::size_t width, std::size_t height, double gsd, std::string band_name = {});
  Raster(std::size_t width, std::size_t height, double gsd, std::string band_name,
         std::vector<float> values);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  double gsd() const { return gsd_; }
  const std::string& band_name() const { return band_name_; }

  void set_gsd(double gsd);
  void set_band_name(std::string name) { band_name_ = std::move(name); }

  float& at(std::size_t x, std::size_t y) { return values_[y * width_ + x]; }
  float at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }

  std::span<float> row(std::size_t y) { return {values_.data() + y * width_, width_}; }
  std::span<const float> row(std::size_t y) const { return {values_.data() + y * width_, width_}; }

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  bool same_shape(const Raster& o) const { return width_ == o.width_ && height_ == o.height_; }
  bool all_finite() const;

  bool operator==(const Raster&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  double gsd_ = 1.0;
  std::string band_name_;
  std::vector<float> values_;
};

/// One applied operation. `params` holds everything needed to replay it.
struct ProvenanceRecord {
  std::string op;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;

  bool operator==(const ProvenanceRecord&) const = default;
};

// Co-registered band set. Annotations live in the pixel grid of the band
// named by pan_band.
struct Granule {
  std::string id;
  std::map<std::string, Raster> rasters;
  std::string pan_band;
  std::vector<std::string> xs_bands;
  std::vector<Annotation> annotations;
  std::vector<ProvenanceRecord> provenance;

  const Raster& band(const std::string& name) const;
  Raster& band(const std::string& name);
  bool has_band(const std::string& name) const { return rasters.count(name) != 0; }
  void put(Raster r);

  const Raster& pan() const { return band(pan_band); }

  /// XS dimension ratio implied by pan_band/xs_bands (1 when no XS bands).
  std::size_t pan_xs_ratio() const;

  /// Throws SchemaError naming the first violated invariant.
  void validate() const;

  bool operator==(const Granule&) const = default;
};

}  // namespace rawsat
