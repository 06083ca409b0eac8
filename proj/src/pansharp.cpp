#include "rawsat/pansharp.hpp"

#include <cmath>

#include "rawsat/error.hpp"
#include "rawsat/parallel.hpp"
#include "rawsat/resample.hpp"
#include "rawsat/restoration.hpp"
#include "rawsat/simd/kernels.hpp"
#include "rawsat/stats.hpp"

namespace rawsat {

std::vector<float> BroveyWeights::resolve(std::size_t bands) const {
  if (w.empty()) return std::vector<float>(bands, 1.0f);
  if (w.size() != bands) {
    throw ConfigError("brovey: " + std::to_string(w.size()) + " weights for " + std::to_string(bands) + " bands");
  }
  double sum = 0;
  for (double v : w) {
    if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("brovey weights must be finite and >= 0");
    sum += v;
  }
  if (!(sum > 0)) throw ConfigError("brovey weights are all zero");
  return std::vector<float>(w.begin(), w.end());
}

BroveyResult brovey(const Raster& pan, const std::vector<const Raster*>& xs, const BroveyWeights& weights,
                    std::size_t ratio, double radiometric_scale) {
  if (xs.empty()) throw ConfigError("brovey needs at least one XS band");
  const auto w = weights.resolve(xs.size());
  if (ratio < 1) throw ConfigError("brovey ratio must be >= 1");
  for (const Raster* m : xs) {
    if (m->width() * ratio != pan.width() || m->height() * ratio != pan.height()) {
      throw SchemaError("brovey: XS band '" + m->band_name() + "' times ratio " + std::to_string(ratio) +
                        " does not match PAN " + std::to_string(pan.width()) + "x" + std::to_string(pan.height()));
    }
  }
  std::vector<Raster> up;
  const auto& k = simd::kernels();
  // Bicubic overshoot can dip below zero; negative radiance would let the
  // denominator cancel.
  for (const Raster* m : xs) {
    up.push_back(upsample_bicubic(*m, ratio));
    k.relu(up.back().values().data(), up.back().size());
  }

  BroveyResult res;
  res.eps = static_cast<float>(1e-6 * radiometric_scale);
  for (const Raster* m : xs) res.bands.emplace_back(pan.width(), pan.height(), pan.gsd(), m->band_name());

  const std::size_t width = pan.width();
  std::vector<std::size_t> guarded(pan.height(), 0);
  parallel_for(
      pan.height(),
      [&](std::size_t y0, std::size_t y1) {
        std::vector<const float*> ms(xs.size());
        std::vector<float*> out(xs.size());
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t j = 0; j < xs.size(); ++j) {
            ms[j] = up[j].row(y).data();
            out[j] = res.bands[j].row(y).data();
          }
          guarded[y] = k.brovey(pan.row(y).data(), ms.data(), w.data(), xs.size(), out.data(), width, res.eps);
        }
      },
      16);
  for (auto g : guarded) res.guarded_pixels += g;
  return res;
}

std::string pansharp_band_name(const std::string& xs_band) {
  std::string base = xs_band;
  if (base.size() > 4 && base.ends_with("_raw")) base.resize(base.size() - 4);
  return "PANSHARP_" + base;
}

Granule pansharpen_granule(const Granule& g, const BroveyWeights& weights, bool use_restored_pan) {
  const std::string pan_name = use_restored_pan ? restored_band_name(g.pan_band) : g.pan_band;
  if (!g.has_band(pan_name)) throw DataError("pansharpen: missing band '" + pan_name + "'");
  if (g.xs_bands.empty()) throw DataError("pansharpen: granule has no XS bands");
  std::vector<const Raster*> xs;
  for (const auto& name : g.xs_bands) {
    if (!g.has_band(name)) throw DataError("pansharpen: missing band '" + name + "'");
    xs.push_back(&g.band(name));
  }
  const Raster& pan = g.band(pan_name);

  double scale = 0;
  for (auto it = g.provenance.rbegin(); it != g.provenance.rend(); ++it) {
    if (it->op == "degrade" && it->params.contains("radiometric_max") && it->params["radiometric_max"].is_number()) {
      scale = it->params["radiometric_max"].get<double>();
      break;
    }
  }
  if (!(scale > 0)) scale = percentile(pan.values(), 99.9);
  if (!(scale > 0)) scale = 1.0;

  BroveyResult res = brovey(pan, xs, weights, g.pan_xs_ratio(), scale);
  Granule out = g;
  nlohmann::json bands = nlohmann::json::array();
  for (std::size_t i = 0; i < res.bands.size(); ++i) {
    res.bands[i].set_band_name(pansharp_band_name(g.xs_bands[i]));
    bands.push_back(res.bands[i].band_name());
    out.put(std::move(res.bands[i]));
  }
  const auto w = weights.resolve(xs.size());
  out.provenance.push_back({"pansharpen",
                            {{"method", "brovey"},
                             {"pan_band", pan_name},
                             {"xs_bands", g.xs_bands},
                             {"weights", std::vector<double>(w.begin(), w.end())},
                             {"use_restored_pan", use_restored_pan},
                             {"output_bands", bands},
                             {"eps", res.eps},
                             {"guarded_pixels", res.guarded_pixels}},
                            0});
  return out;
}

}  // namespace rawsat
