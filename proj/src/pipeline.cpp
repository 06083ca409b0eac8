#include "rawsat/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "rawsat/error.hpp"
#include "rawsat/granule_io.hpp"
#include "rawsat/log.hpp"
#include "rawsat/rng.hpp"

namespace rawsat {

namespace fs = std::filesystem;
using nlohmann::json;

const char* variant_name(Variant v) { return v == Variant::Restored ? "L1-sim" : "raw-sim"; }

Variant variant_from_name(const std::string& name) {
  if (name == "raw" || name == "raw-sim") return Variant::Raw;
  if (name == "restored" || name == "L1-sim") return Variant::Restored;
  throw ConfigError("unknown variant '" + name + "' (expected raw | restored)");
}

std::uint64_t granule_seed(std::uint64_t seed, const std::string& granule_id) {
  return combine_stream(seed, hash_label(granule_id));
}

json toml_to_json(const std::string& toml_text) {
  toml::table tbl;
  try {
    tbl = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "TOML line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
  std::ostringstream os;
  os << toml::json_formatter{tbl};
  return json::parse(os.str());
}

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) { return p.is_absolute() || p.empty() ? p : base / p; }

json restore_to_json(const RestoreConfig& r) {
  json j{{"method", restore_method_name(r.method)}};
  if (!r.weights.empty()) j["weights"] = r.weights.string();
  if (r.nsr) j["nsr"] = *r.nsr;
  if (r.mtf) j["mtf_at_nyquist"] = r.mtf->mtf_at_nyquist;
  return j;
}

RestoreConfig restore_from_json(const json& j, const fs::path& base) {
  RestoreConfig r;
  if (j.contains("method")) r.method = restore_method_from_name(j["method"].get<std::string>());
  if (j.contains("weights")) r.weights = resolve(j["weights"].get<std::string>(), base);
  if (j.contains("nsr")) r.nsr = j["nsr"].get<double>();
  if (j.contains("mtf_at_nyquist")) {
    MtfSpec m;
    m.mtf_at_nyquist = j["mtf_at_nyquist"].get<double>();
    r.mtf = m;
  }
  return r;
}

json classes_to_json(const ClassSelection& s) {
  if (const auto* k = std::get_if<ClassKeep>(&s)) return {{"keep", k->ids}};
  return {{"top_k", std::get<ClassTopK>(s).k}};
}

// Wraps a stage so errors carry its name and timings reach the log.
template <typename F>
auto run_stage(const char* stage, const std::string& granule, F&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };
  try {
    auto r = fn();
    log_event(LogLevel::Info, "stage_done", {{"stage", stage}, {"granule", granule}, {"ms", elapsed()}});
    return r;
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("stage ") + stage + " (" + granule + "): " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string("stage ") + stage + " (" + granule + "): " + e.what());
  } catch (const std::exception& e) {
    throw Error(std::string("stage ") + stage + " (" + granule + "): " + e.what());
  }
}

}  // namespace

void PipelineConfig::validate(Variant variant) const {
  if (inputs.empty() && synth.empty()) throw ConfigError("pipeline: no inputs and no [[synth]] scenes");
  for (const auto& p : inputs)
    if (!fs::is_directory(p)) throw ConfigError("pipeline: input granule '" + p.string() + "' does not exist");
  for (const auto& s : synth) s.validate();
  degrade.validate();
  if (variant == Variant::Restored) {
    if (restore.method == RestoreMethod::None) {
      throw ConfigError("pipeline: the restored variant needs [restore] method = wiener | edsr");
    }
    restore.validate();
  }
  pansharp.resolve(pansharp.w.empty() ? 1 : pansharp.w.size());
  tile.validate();
  split.validate();
  evaluate.validate();
  if (png_scale && !(png_scale->hi > png_scale->lo)) throw ConfigError("pipeline: png_scale needs lo < hi");
  if (output.empty()) throw ConfigError("pipeline: output is not set");
  if (fs::exists(output) && !overwrite) {
    throw ConfigError("pipeline: output '" + output.string() + "' exists (set overwrite = true)");
  }
}

json PipelineConfig::to_json() const {
  json in = json::array(), sy = json::array();
  for (const auto& p : inputs) in.push_back(p.string());
  for (const auto& s : synth) sy.push_back(s.to_json());
  json j{{"seed", seed},
         {"output", output.string()},
         {"overwrite", overwrite},
         {"inputs", in},
         {"synth", sy},
         {"degrade", degrade.to_json()},
         {"restore", restore_to_json(restore)},
         {"pansharp", {{"weights", pansharp.w}}},
         {"tile", tile.to_json()},
         {"export", {{"split", {{"train", split.train}, {"val", split.val}, {"test", split.test}}}}},
         {"evaluate", evaluate.to_json()}};
  if (png_scale) j["export"]["png_scale"] = {png_scale->lo, png_scale->hi};
  if (classes) j["classes"] = classes_to_json(*classes);
  return j;
}

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base) {
  PipelineConfig c;
  try {
    c.seed = j.value("seed", std::uint64_t{0});
    c.overwrite = j.value("overwrite", false);
    if (j.contains("output")) c.output = resolve(j["output"].get<std::string>(), base);
    for (const auto& p : j.value("inputs", json::array())) c.inputs.push_back(resolve(p.get<std::string>(), base));
    for (const auto& s : j.value("synth", json::array())) c.synth.push_back(SceneSpec::from_json(s));
    if (j.contains("degrade")) c.degrade = DegradationConfig::from_json(j["degrade"]);
    if (j.contains("restore")) c.restore = restore_from_json(j["restore"], base);
    if (j.contains("pansharp")) c.pansharp.w = j["pansharp"].value("weights", std::vector<double>{});
    if (j.contains("tile")) c.tile = TileSpec::from_json(j["tile"]);
    if (j.contains("classes")) {
      const auto& cl = j["classes"];
      if (cl.contains("keep")) {
        c.classes = ClassKeep{cl["keep"].get<std::vector<int>>()};
      } else if (cl.contains("top_k")) {
        c.classes = ClassTopK{cl["top_k"].get<std::size_t>()};
      }
    }
    if (j.contains("export")) {
      const auto& e = j["export"];
      if (e.contains("split")) {
        c.split.train = e["split"].value("train", 0.0);
        c.split.val = e["split"].value("val", 0.0);
        c.split.test = e["split"].value("test", 0.0);
      }
      if (e.contains("png_scale")) c.png_scale = LinearScale{e["png_scale"].at(0), e["png_scale"].at(1)};
    }
    if (j.contains("evaluate")) c.evaluate = EvalConfig::from_json(j["evaluate"]);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  // The global seed feeds every stage.
  c.degrade.seed = c.seed;
  c.tile.seed = c.seed;
  return c;
}

PipelineConfig parse_pipeline_config(const std::string& toml_text, const fs::path& base_dir) {
  return PipelineConfig::from_json(toml_to_json(toml_text), base_dir);
}

PipelineConfig load_pipeline_config(const fs::path& toml_file) {
  std::ifstream in(toml_file);
  if (!in) throw ConfigError("cannot open config " + toml_file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pipeline_config(ss.str(), toml_file.parent_path());
}

json run_pipeline(const PipelineConfig& cfg, Variant variant) {
  cfg.validate(variant);
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<Granule> granules;
  for (const auto& p : cfg.inputs) {
    granules.push_back(run_stage("load", p.string(), [&] { return read_granule(p); }));
  }
  for (const auto& s : cfg.synth) {
    granules.push_back(run_stage("synth", s.id, [&] { return synth_granule(s); }));
  }
  if (cfg.classes) {
    std::vector<const Granule*> ptrs;
    for (const auto& g : granules) ptrs.push_back(&g);
    const ClassFilter f = run_stage("filter_classes", "*", [&] { return select_classes(ptrs, *cfg.classes); });
    for (auto& g : granules) g = apply_class_filter(g, f);
  }

  std::vector<std::string> stages{"degrade"};
  if (variant == Variant::Restored) stages.push_back("restore");
  for (const char* s : {"pansharpen", "tile", "export"}) stages.push_back(s);

  std::vector<Tile> tiles;
  json provenance = json::object();
  std::map<int, std::string> class_names;
  double rmax = 0;
  for (const auto& src : granules) {
    DegradationConfig dc = cfg.degrade;
    dc.seed = granule_seed(cfg.seed, src.id);
    Granule g = run_stage("degrade", src.id, [&] { return degrade(src, dc); });
    rmax = std::max(rmax, g.provenance.back().params["radiometric_max"].get<double>());
    if (variant == Variant::Restored) g = run_stage("restore", src.id, [&] { return restore_granule(g, cfg.restore); });
    g = run_stage("pansharpen", src.id,
                  [&] { return pansharpen_granule(g, cfg.pansharp, variant == Variant::Restored); });
    TilingResult tr = run_stage("tile", src.id, [&] { return make_tiles(g, cfg.tile); });
    for (const auto& w : tr.warnings)
      log_event(LogLevel::Warn, "tile_skipped", {{"granule", w.granule}, {"annotation", w.annotation}, {"reason", w.message}});
    g.provenance.push_back({"tile", {{"spec", cfg.tile.to_json()}, {"tiles", tr.tiles.size()}, {"skipped", tr.warnings.size()}},
                            cfg.tile.seed});
    for (const auto& a : g.annotations) class_names.try_emplace(a.class_id, a.class_name);
    json recs = json::array();
    for (const auto& p : g.provenance) recs.push_back(to_json(p));
    provenance[g.id] = recs;
    for (auto& t : tr.tiles) tiles.push_back(std::move(t));
  }

  ExportOptions opt;
  opt.split = cfg.split;
  opt.seed = cfg.seed;
  opt.scale = cfg.png_scale ? *cfg.png_scale : LinearScale{0, rmax};
  opt.class_names = class_names;

  const fs::path out = fs::absolute(cfg.output);
  const fs::path tmp = out.parent_path() / ("." + out.filename().string() + ".partial");
  fs::remove_all(tmp);
  fs::create_directories(out.parent_path());
  try {
    json manifest = run_stage("export", "*", [&] { return export_dataset(tiles, tmp, opt); });
    manifest["variant"] = variant_name(variant);
    manifest["stages"] = stages;
    manifest["config"] = cfg.to_json();
    manifest["config"].erase("output");
    manifest["provenance"] = provenance;
    write_manifest(manifest, tmp);
    if (fs::exists(out)) fs::remove_all(out);
    fs::rename(tmp, out);
    log_event(LogLevel::Info, "pipeline_done",
              {{"variant", variant_name(variant)},
               {"tiles", tiles.size()},
               {"ms", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()}});
    return manifest;
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

}  // namespace rawsat
