#include "rawsat/sensor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rawsat/error.hpp"
#include "rawsat/parallel.hpp"
#include "rawsat/resample.hpp"
#include "rawsat/simd/kernels.hpp"
#include "rawsat/stats.hpp"

namespace rawsat {
using nlohmann::json;

Raster misregister(const Raster& r, double dx, double dy) {
  const double limit = static_cast<double>(std::min(r.width(), r.height())) / 4.0;
  if (!(std::abs(dx) < limit) || !(std::abs(dy) < limit)) {
    throw ConfigError("misregistration shift (" + std::to_string(dx) + ", " + std::to_string(dy) +
                      ") must stay below a quarter of the smaller dimension");
  }
  if (dx == 0 && dy == 0) return r;
  const std::size_t w = r.width(), h = r.height();
  // Column taps are shared by all rows.
  std::vector<std::size_t> x0(w), x1(w);
  std::vector<double> tx(w);
  for (std::size_t x = 0; x < w; ++x) {
    const double sx = std::clamp(static_cast<double>(x) - dx, 0.0, static_cast<double>(w - 1));
    x0[x] = static_cast<std::size_t>(std::floor(sx));
    x1[x] = std::min(x0[x] + 1, w - 1);
    tx[x] = sx - static_cast<double>(x0[x]);
  }
  Raster out(w, h, r.gsd(), r.band_name());
  parallel_for(
      h,
      [&](std::size_t ya, std::size_t yb) {
        for (std::size_t y = ya; y < yb; ++y) {
          const double sy = std::clamp(static_cast<double>(y) - dy, 0.0, static_cast<double>(h - 1));
          const auto y0 = static_cast<std::size_t>(std::floor(sy));
          const auto y1 = std::min(y0 + 1, h - 1);
          const double ty = sy - static_cast<double>(y0);
          const auto r0 = r.row(y0), r1 = r.row(y1);
          auto dst = out.row(y);
          for (std::size_t x = 0; x < w; ++x) {
            const double top = r0[x0[x]] * (1 - tx[x]) + r0[x1[x]] * tx[x];
            const double bot = r1[x0[x]] * (1 - tx[x]) + r1[x1[x]] * tx[x];
            dst[x] = static_cast<float>(top * (1 - ty) + bot * ty);
          }
        }
      },
      16);
  return out;
}

Raster quantize(const Raster& r, int bits, double radiometric_max) {
  if (bits < 8 || bits > 16) throw ConfigError("quant_bits must be in [8, 16]");
  if (!(radiometric_max > 0)) throw ConfigError("radiometric_max must be positive");
  const double max_code = std::ldexp(1.0, bits) - 1.0;
  const auto& k = simd::kernels();
  Raster out(r.width(), r.height(), r.gsd(), r.band_name());
  const std::size_t w = r.width();
  parallel_for(
      r.height(),
      [&](std::size_t y0, std::size_t y1) {
        k.quantize(r.values().data() + y0 * w, max_code, radiometric_max, out.values().data() + y0 * w,
                   (y1 - y0) * w);
      },
      32);
  return out;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Downsample: return "downsample";
    case Stage::Misregister: return "misregister";
    case Stage::Mtf: return "mtf";
    case Stage::Noise: return "noise";
    case Stage::Quantize: return "quantize";
  }
  return "?";
}

Stage stage_from_name(const std::string& name) {
  for (Stage s : {Stage::Downsample, Stage::Misregister, Stage::Mtf, Stage::Noise, Stage::Quantize}) {
    if (name == stage_name(s)) return s;
  }
  throw ConfigError("unknown degradation stage '" + name + "'");
}

namespace {

json noise_to_json(const NoiseModel& m) {
  json j{{"alpha", m.alpha}, {"beta", m.beta}};
  if (m.dark) j["dark"] = {m.dark->luminance, m.dark->snr};
  if (m.bright) j["bright"] = {m.bright->luminance, m.bright->snr};
  return j;
}

NoiseAnchor anchor_from_json(const json& j, bool db) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("noise anchor must be [luminance, snr]");
  NoiseAnchor a{j[0].get<double>(), j[1].get<double>()};
  if (db) a.snr = snr_from_db(a.snr);
  return a;
}

NoiseModel noise_from_json(const json& j, const NoiseModel& base) {
  const bool db = j.value("snr_unit", std::string("linear")) == "db";
  if (!j.contains("alpha") && !j.contains("beta") && j.contains("dark") && j.contains("bright")) {
    return fit_noise_params(anchor_from_json(j["dark"], db), anchor_from_json(j["bright"], db));
  }
  NoiseModel m = base;
  if (j.contains("alpha") || j.contains("beta")) {
    m.dark.reset();
    m.bright.reset();
  }
  m.alpha = j.value("alpha", m.alpha);
  m.beta = j.value("beta", m.beta);
  if (j.contains("dark")) m.dark = anchor_from_json(j["dark"], db);
  if (j.contains("bright")) m.bright = anchor_from_json(j["bright"], db);
  return m;
}

json band_to_json(const BandDegradation& b) {
  return {{"mtf_at_nyquist", b.mtf.mtf_at_nyquist},
          {"kernel_half_width", b.mtf.kernel_half_width},
          {"noise", noise_to_json(b.noise)},
          {"misregistration", {b.dx, b.dy}}};
}

BandDegradation band_from_json(const json& j, const BandDegradation& base) {
  BandDegradation b = base;
  b.mtf.mtf_at_nyquist = j.value("mtf_at_nyquist", b.mtf.mtf_at_nyquist);
  b.mtf.kernel_half_width = j.value("kernel_half_width", b.mtf.kernel_half_width);
  if (j.contains("noise")) b.noise = noise_from_json(j["noise"], b.noise);
  if (j.contains("misregistration")) {
    const auto& m = j["misregistration"];
    if (!m.is_array() || m.size() != 2) throw ConfigError("misregistration must be [dx, dy]");
    b.dx = m[0].get<double>();
    b.dy = m[1].get<double>();
  }
  return b;
}

template <typename E>
[[noreturn]] void rethrow_as(const E&, const std::string& msg) {
  throw E(msg);
}

}  // namespace

const BandDegradation& DegradationConfig::for_band(const std::string& name) const {
  auto it = bands.find(name);
  return it == bands.end() ? defaults : it->second;
}

void DegradationConfig::validate() const {
  if (pre_downsample_factor < 1) throw ConfigError("pre_downsample_factor must be >= 1");
  if (quant_bits < 8 || quant_bits > 16) throw ConfigError("quant_bits must be in [8, 16]");
  if (radiometric_max && !(*radiometric_max > 0)) throw ConfigError("radiometric_max must be positive");
  std::set<Stage> seen;
  for (Stage s : stage_order) {
    if (!seen.insert(s).second) {
      throw ConfigError(std::string("stage '") + stage_name(s) + "' listed more than once");
    }
  }
  defaults.mtf.validate();
  for (const auto& [name, b] : bands) b.mtf.validate();
}

json DegradationConfig::to_json() const {
  json stages = json::array();
  for (Stage s : stage_order) stages.push_back(stage_name(s));
  json per_band = json::object();
  for (const auto& [name, b] : bands) per_band[name] = band_to_json(b);
  return {{"pre_downsample_factor", pre_downsample_factor},
          {"quant_bits", quant_bits},
          {"radiometric_max", radiometric_max ? json(*radiometric_max) : json(nullptr)},
          {"stage_order", stages},
          {"seed", seed},
          {"defaults", band_to_json(defaults)},
          {"bands", per_band}};
}

DegradationConfig DegradationConfig::from_json(const json& j) {
  DegradationConfig c;
  try {
    c.pre_downsample_factor = j.value("pre_downsample_factor", c.pre_downsample_factor);
    c.quant_bits = j.value("quant_bits", c.quant_bits);
    if (j.contains("radiometric_max") && !j["radiometric_max"].is_null()) {
      c.radiometric_max = j["radiometric_max"].get<double>();
    }
    if (j.contains("stage_order")) {
      c.stage_order.clear();
      for (const auto& s : j["stage_order"]) c.stage_order.push_back(stage_from_name(s.get<std::string>()));
    }
    c.seed = j.value("seed", c.seed);
    // Top-level band keys act as defaults, matching the flat TOML layout.
    c.defaults = band_from_json(j, c.defaults);
    if (j.contains("defaults")) c.defaults = band_from_json(j["defaults"], c.defaults);
    if (j.contains("bands")) {
      for (const auto& [name, b] : j["bands"].items()) c.bands[name] = band_from_json(b, c.defaults);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("[degrade]: ") + e.what());
  }
  c.validate();
  return c;
}

std::string raw_band_name(const std::string& source) { return source + "_raw"; }

Granule degrade(const Granule& g, const DegradationConfig& cfg) {
  cfg.validate();
  g.validate();
  std::vector<Stage> order = cfg.stage_order;
  if (std::find(order.begin(), order.end(), Stage::Downsample) == order.end()) {
    order.insert(order.begin(), Stage::Downsample);
  }
  const double rmax = cfg.radiometric_max ? *cfg.radiometric_max : percentile(g.pan().values(), 99.9);
  if (!(rmax > 0)) throw DataError("radiometric_max resolved to " + std::to_string(rmax) + "; set it explicitly");

  Granule out;
  out.id = g.id;
  out.pan_band = raw_band_name(g.pan_band);

  std::vector<std::string> sources{g.pan_band};
  sources.insert(sources.end(), g.xs_bands.begin(), g.xs_bands.end());
  for (const auto& name : sources) {
    const bool is_xs = name != g.pan_band;
    const BandDegradation& bd = cfg.for_band(name);
    Raster cur = g.band(name);
    for (Stage s : order) {
      try {
        switch (s) {
          case Stage::Downsample:
            cur = downsample_block(cur, cfg.pre_downsample_factor);
            break;
          case Stage::Misregister:
            if (is_xs) cur = misregister(cur, bd.dx, bd.dy);
            break;
          case Stage::Mtf:
            cur = apply_mtf(cur, bd.mtf);
            break;
          case Stage::Noise: {
            // Radiance is non-negative; MTF ringing can dip below zero.
            for (float& v : cur.values()) v = v > 0.0f ? v : 0.0f;
            const Rng rng(cfg.seed, combine_stream(hash_label("noise"), hash_label(name)));
            cur = apply_noise(cur, bd.noise, rng);
            break;
          }
          case Stage::Quantize:
            cur = quantize(cur, cfg.quant_bits, rmax);
            break;
        }
      } catch (const ConfigError& e) {
        rethrow_as(e, std::string("degrade stage '") + stage_name(s) + "' on band '" + name + "': " + e.what());
      } catch (const SchemaError& e) {
        rethrow_as(e, std::string("degrade stage '") + stage_name(s) + "' on band '" + name + "': " + e.what());
      } catch (const DataError& e) {
        rethrow_as(e, std::string("degrade stage '") + stage_name(s) + "' on band '" + name + "': " + e.what());
      }
    }
    cur.set_band_name(raw_band_name(name));
    if (is_xs) out.xs_bands.push_back(cur.band_name());
    out.put(std::move(cur));
  }

  const double inv = 1.0 / static_cast<double>(cfg.pre_downsample_factor);
  for (Annotation a : g.annotations) {
    a.bbox = {a.bbox.xmin * inv, a.bbox.ymin * inv, a.bbox.xmax * inv, a.bbox.ymax * inv};
    out.annotations.push_back(std::move(a));
  }
  out.provenance = g.provenance;
  json params = cfg.to_json();
  params["radiometric_max"] = rmax;
  json resolved = json::array();
  for (Stage s : order) resolved.push_back(stage_name(s));
  params["stage_order"] = resolved;
  out.provenance.push_back({"degrade", params, cfg.seed});
  out.validate();
  return out;
}

}  // namespace rawsat
