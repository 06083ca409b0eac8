#include "rawsat/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rawsat/error.hpp"
#include "rawsat/mtf.hpp"
#include "rawsat/resample.hpp"
#include "rawsat/rng.hpp"
#include "rawsat/stats.hpp"

namespace rawsat {
using nlohmann::json;

void SceneSpec::validate() const {
  if (ratio < 1 || width % ratio || height % ratio || width == 0 || height == 0) {
    throw ConfigError("scene dimensions must be positive multiples of ratio");
  }
  if (!(gsd > 0)) throw ConfigError("scene gsd must be positive");
  if (!(size_min > 0 && size_max >= size_min)) throw ConfigError("scene size range invalid");
  if (size_max + 4 > static_cast<double>(std::min(width, height))) throw ConfigError("objects do not fit the scene");
  if (!(aspect_min > 0 && aspect_max >= aspect_min && aspect_max <= 1)) throw ConfigError("scene aspect range invalid");
  if (!(contrast_min > 0 && contrast_max >= contrast_min)) throw ConfigError("object contrast must be > 0");
  if (texture_amplitude < 0 || texture_scale < 0) throw ConfigError("texture parameters must be >= 0");
  if (n_classes < 1) throw ConfigError("n_classes must be >= 1");
  if (tints.size() != xs_bands.size()) throw ConfigError("one tint per XS band required");
}

json SceneSpec::to_json() const {
  return {{"id", id},
          {"width", width},
          {"height", height},
          {"ratio", ratio},
          {"gsd", gsd},
          {"background_mean", background_mean},
          {"texture_amplitude", texture_amplitude},
          {"texture_scale", texture_scale},
          {"object_count", object_count},
          {"size_range", {size_min, size_max}},
          {"aspect_range", {aspect_min, aspect_max}},
          {"contrast_range", {contrast_min, contrast_max}},
          {"rotate", rotate},
          {"n_classes", n_classes},
          {"xs_bands", xs_bands},
          {"tints", tints},
          {"seed", seed}};
}

SceneSpec SceneSpec::from_json(const json& j) {
  SceneSpec s;
  try {
    s.id = j.value("id", s.id);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.ratio = j.value("ratio", s.ratio);
    s.gsd = j.value("gsd", s.gsd);
    s.background_mean = j.value("background_mean", s.background_mean);
    s.texture_amplitude = j.value("texture_amplitude", s.texture_amplitude);
    s.texture_scale = j.value("texture_scale", s.texture_scale);
    s.object_count = j.value("object_count", s.object_count);
    if (j.contains("size_range")) std::tie(s.size_min, s.size_max) = std::pair{j["size_range"][0].get<double>(), j["size_range"][1].get<double>()};
    if (j.contains("aspect_range")) std::tie(s.aspect_min, s.aspect_max) = std::pair{j["aspect_range"][0].get<double>(), j["aspect_range"][1].get<double>()};
    if (j.contains("contrast_range")) std::tie(s.contrast_min, s.contrast_max) = std::pair{j["contrast_range"][0].get<double>(), j["contrast_range"][1].get<double>()};
    s.rotate = j.value("rotate", s.rotate);
    s.n_classes = j.value("n_classes", s.n_classes);
    s.xs_bands = j.value("xs_bands", s.xs_bands);
    s.tints = j.value("tints", s.tints);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

Raster background(const SceneSpec& spec) {
  Raster r(spec.width, spec.height, spec.gsd, "PAN");
  if (spec.texture_amplitude == 0) {
    std::fill(r.values().begin(), r.values().end(), static_cast<float>(spec.background_mean));
    return r;
  }
  Rng rng(spec.seed, hash_label("background"));
  rng.normals_at(0, 0, r.values());
  if (spec.texture_scale > 0) {
    const int hw = std::max(1, static_cast<int>(std::ceil(3 * spec.texture_scale)));
    std::vector<float> taps(2 * hw + 1);
    double sum = 0;
    for (int i = -hw; i <= hw; ++i) sum += std::exp(-0.5 * i * i / (spec.texture_scale * spec.texture_scale));
    for (int i = -hw; i <= hw; ++i) {
      taps[i + hw] = static_cast<float>(std::exp(-0.5 * i * i / (spec.texture_scale * spec.texture_scale)) / sum);
    }
    r = convolve_separable(r, taps);
  }
  const MeanVar mv = mean_variance(r.values());
  const double gain = mv.variance > 0 ? spec.texture_amplitude / std::sqrt(mv.variance) : 0.0;
  for (float& v : r.values()) {
    v = static_cast<float>(std::max(0.0, spec.background_mean + gain * (v - mv.mean)));
  }
  return r;
}

struct Shape {
  double cx, cy, half_len, half_wid, cos_t, sin_t;
  bool ellipse;
  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = (dx * cos_t + dy * sin_t) / half_len;
    const double v = (-dx * sin_t + dy * cos_t) / half_wid;
    return ellipse ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
  }
};

}  // namespace

Granule synth_granule(const SceneSpec& spec) {
  spec.validate();
  Raster pan = background(spec);
  const double W = static_cast<double>(spec.width), H = static_cast<double>(spec.height);

  Granule g;
  g.id = spec.id;
  g.pan_band = "PAN";
  std::vector<BBox> placed;
  for (std::size_t i = 0; i < spec.object_count; ++i) {
    Rng rng(spec.seed, combine_stream(hash_label("object"), i));
    const int cls = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(spec.n_classes));
    const double slice = (spec.size_max - spec.size_min) / spec.n_classes;
    const double len = spec.size_min + slice * (cls + rng.next_uniform());
    const double wid = std::max(2.0, len * (spec.aspect_min + (spec.aspect_max - spec.aspect_min) * rng.next_uniform()));
    const double theta = spec.rotate ? std::numbers::pi * rng.next_uniform() : 0.0;
    const bool ellipse = spec.rotate && rng.next_uniform() < 0.5;
    const double contrast = spec.contrast_min + (spec.contrast_max - spec.contrast_min) * rng.next_uniform();
    // Half extent of the rotated rectangle bounds either shape.
    const double ex = 0.5 * (len * std::abs(std::cos(theta)) + wid * std::abs(std::sin(theta)));
    const double ey = 0.5 * (len * std::abs(std::sin(theta)) + wid * std::abs(std::cos(theta)));
    Shape s{0, 0, 0.5 * len, 0.5 * wid, std::cos(theta), std::sin(theta), ellipse};
    bool ok = false;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
      s.cx = ex + 1 + (W - 2 * ex - 2) * rng.next_uniform();
      s.cy = ey + 1 + (H - 2 * ey - 2) * rng.next_uniform();
      const BBox cand{s.cx - ex - 2, s.cy - ey - 2, s.cx + ex + 2, s.cy + ey + 2};
      ok = std::none_of(placed.begin(), placed.end(), [&](const BBox& b) {
        return cand.xmin < b.xmax && b.xmin < cand.xmax && cand.ymin < b.ymax && b.ymin < cand.ymax;
      });
      if (ok) placed.push_back(cand);
    }
    if (!ok) continue;  // scene too crowded; fewer objects than requested
    const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(s.cx - ex - 1)));
    const auto x1 = static_cast<std::size_t>(std::min(W - 1, std::ceil(s.cx + ex + 1)));
    const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(s.cy - ey - 1)));
    const auto y1 = static_cast<std::size_t>(std::min(H - 1, std::ceil(s.cy + ey + 1)));
    std::size_t bx0 = SIZE_MAX, by0 = SIZE_MAX, bx1 = 0, by1 = 0;
    for (std::size_t y = y0; y <= y1; ++y) {
      for (std::size_t x = x0; x <= x1; ++x) {
        if (!s.contains(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) continue;
        pan.at(x, y) += static_cast<float>(contrast);
        bx0 = std::min(bx0, x);
        by0 = std::min(by0, y);
        bx1 = std::max(bx1, x + 1);
        by1 = std::max(by1, y + 1);
      }
    }
    if (bx0 == SIZE_MAX) continue;
    g.annotations.push_back({cls, "vessel_" + std::to_string(cls),
                             {static_cast<double>(bx0), static_cast<double>(by0), static_cast<double>(bx1),
                              static_cast<double>(by1)}});
  }

  const Raster xs_base = downsample_block(pan, spec.ratio);
  for (std::size_t b = 0; b < spec.xs_bands.size(); ++b) {
    Raster x = xs_base;
    for (float& v : x.values()) v = static_cast<float>(v * spec.tints[b]);
    x.set_band_name(spec.xs_bands[b]);
    g.put(std::move(x));
    g.xs_bands.push_back(spec.xs_bands[b]);
  }
  g.put(std::move(pan));
  g.provenance.push_back({"synth", spec.to_json(), spec.seed});
  g.validate();
  return g;
}

}  // namespace rawsat
