#include "rawsat/raster.hpp"

#include <cmath>

#include "rawsat/error.hpp"

namespace rawsat {

Raster::Raster(std::size_t width, std::size_t height, double gsd, std::string band_name)
    : Raster(width, height, gsd, std::move(band_name), std::vector<float>(width * height, 0.0f)) {}

Raster::Raster(std::size_t width, std::size_t height, double gsd, std::string band_name,
               std::vector<float> values)
    : width_(width), height_(height), gsd_(gsd), band_name_(std::move(band_name)),
      values_(std::move(values)) {
  if (width_ == 0 || height_ == 0) {
    throw SchemaError("raster '" + band_name_ + "' must have positive dimensions");
  }
  if (values_.size() != width_ * height_) {
    throw SchemaError("raster '" + band_name_ + "': band size mismatch (" +
                      std::to_string(values_.size()) + " values for " + std::to_string(width_) +
                      "x" + std::to_string(height_) + ")");
  }
  set_gsd(gsd);
}

void Raster::set_gsd(double gsd) {
  if (!(gsd > 0) || !std::isfinite(gsd)) {
    throw SchemaError("raster '" + band_name_ + "': gsd must be positive");
  }
  gsd_ = gsd;
}

bool Raster::all_finite() const {
  for (float v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

const Raster& Granule::band(const std::string& name) const {
  auto it = rasters.find(name);
  if (it == rasters.end()) throw SchemaError("granule '" + id + "' has no band '" + name + "'");
  return it->second;
}

Raster& Granule::band(const std::string& name) {
  auto it = rasters.find(name);
  if (it == rasters.end()) throw SchemaError("granule '" + id + "' has no band '" + name + "'");
  return it->second;
}

void Granule::put(Raster r) {
  std::string name = r.band_name();
  rasters.insert_or_assign(std::move(name), std::move(r));
}

std::size_t Granule::pan_xs_ratio() const {
  if (xs_bands.empty()) return 1;
  const Raster& p = pan();
  const Raster& x = band(xs_bands.front());
  return p.width() / x.width();
}

void Granule::validate() const {
  if (id.empty()) throw SchemaError("granule id must not be empty");
  for (const auto& [name, r] : rasters) {
    if (name != r.band_name()) {
      throw SchemaError("band key '" + name + "' does not match raster name '" + r.band_name() + "'");
    }
    if (r.size() != r.width() * r.height() || r.width() == 0 || r.height() == 0) {
      throw SchemaError("band '" + name + "' has inconsistent dimensions");
    }
  }
  const Raster& p = pan();
  if (!xs_bands.empty()) {
    const Raster& x0 = band(xs_bands.front());
    for (const auto& name : xs_bands) {
      if (!band(name).same_shape(x0)) {
        throw SchemaError("XS band '" + name + "' differs in size from '" + xs_bands.front() + "'");
      }
    }
    if (p.width() % x0.width() != 0 || p.height() % x0.height() != 0 ||
        p.width() / x0.width() != p.height() / x0.height()) {
      throw SchemaError("PAN dimensions are not an integer multiple of XS dimensions");
    }
  }
  for (const auto& a : annotations) {
    if (!a.bbox.valid()) {
      throw SchemaError("annotation of class " + std::to_string(a.class_id) + " has an empty box");
    }
    if (a.class_id < 0) throw SchemaError("annotation class_id must be >= 0");
    if (a.bbox.xmin < 0 || a.bbox.ymin < 0 || a.bbox.xmax > static_cast<double>(p.width()) ||
        a.bbox.ymax > static_cast<double>(p.height())) {
      throw SchemaError("annotation box lies outside the PAN raster bounds");
    }
  }
}

}  // namespace rawsat
