#include "rawsat/restoration.hpp"

#include "rawsat/edsr.hpp"
#include "rawsat/error.hpp"
#include "rawsat/wiener.hpp"

namespace rawsat {

const char* restore_method_name(RestoreMethod m) {
  switch (m) {
    case RestoreMethod::None: return "none";
    case RestoreMethod::Wiener: return "wiener";
    case RestoreMethod::Edsr: return "edsr";
  }
  return "?";
}

RestoreMethod restore_method_from_name(const std::string& name) {
  for (RestoreMethod m : {RestoreMethod::None, RestoreMethod::Wiener, RestoreMethod::Edsr}) {
    if (name == restore_method_name(m)) return m;
  }
  throw ConfigError("unknown restore method '" + name + "' (expected none, wiener or edsr)");
}

void RestoreConfig::validate() const {
  if (method == RestoreMethod::Edsr) {
    if (weights.empty()) throw ConfigError("restore method edsr needs a weights path");
    if (!std::filesystem::is_regular_file(weights)) {
      throw ConfigError("EDSR weights file not found: " + weights.string());
    }
  }
  if (mtf) mtf->validate();
  if (nsr && !(*nsr >= 0)) throw ConfigError("wiener nsr must be >= 0");
}

std::string restored_band_name(const std::string& pan_band) {
  std::string base = pan_band;
  if (base.size() > 4 && base.ends_with("_raw")) base.resize(base.size() - 4);
  return base + "_restored";
}

namespace {

// Degradation parameters of the PAN band as recorded by degrade().
void from_provenance(const Granule& g, std::optional<MtfSpec>& mtf, std::optional<NoiseModel>& noise) {
  for (auto it = g.provenance.rbegin(); it != g.provenance.rend(); ++it) {
    if (it->op != "degrade") continue;
    const auto& p = it->params;
    std::string source = g.pan_band;
    if (source.ends_with("_raw")) source.resize(source.size() - 4);
    const auto& band = p.contains("bands") && p["bands"].contains(source) ? p["bands"][source] : p["defaults"];
    bool has_mtf = false, has_noise = false;
    for (const auto& s : p["stage_order"]) {
      has_mtf |= s == "mtf";
      has_noise |= s == "noise";
    }
    if (!mtf) {
      mtf = MtfSpec{has_mtf ? band["mtf_at_nyquist"].get<double>() : 1.0, band["kernel_half_width"].get<int>()};
    }
    if (!noise) {
      noise = has_noise ? NoiseModel{band["noise"]["alpha"].get<double>(), band["noise"]["beta"].get<double>()}
                        : NoiseModel{};
    }
    return;
  }
}

}  // namespace

Granule restore_granule(const Granule& g, const RestoreConfig& cfg) {
  cfg.validate();
  Granule out = g;
  if (cfg.method == RestoreMethod::None) return out;
  const Raster& pan = g.pan();
  Raster restored;
  nlohmann::json params{{"method", restore_method_name(cfg.method)}, {"input_band", g.pan_band}};
  if (cfg.method == RestoreMethod::Wiener) {
    std::optional<MtfSpec> mtf = cfg.mtf;
    std::optional<NoiseModel> noise = cfg.noise;
    if (!mtf || (!cfg.nsr && !noise)) from_provenance(g, mtf, noise);
    if (!mtf) throw ConfigError("wiener restore: no MTF given and no degrade record to take it from");
    double nsr = 0;
    if (cfg.nsr) {
      nsr = *cfg.nsr;
    } else if (noise && (noise->alpha != 0 || noise->beta != 0)) {
      nsr = estimate_nsr(pan, *noise);
    }
    restored = wiener_restore(pan, {*mtf, nsr});
    params["mtf_at_nyquist"] = mtf->mtf_at_nyquist;
    params["kernel_half_width"] = mtf->kernel_half_width;
    params["nsr"] = nsr;
  } else {
    const EdsrWeights w = load_weights(cfg.weights);
    restored = edsr_infer(pan, w);
    params["weights"] = cfg.weights.filename().string();
    params["n_blocks"] = w.n_blocks;
    params["channels"] = w.channels;
  }
  restored.set_band_name(restored_band_name(g.pan_band));
  params["output_band"] = restored.band_name();
  out.put(std::move(restored));
  out.provenance.push_back({"restore", params, 0});
  return out;
}

}  // namespace rawsat
