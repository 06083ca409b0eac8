// rawsat command-line front end. Each subcommand wraps one library stage;
// `run` drives the whole chain from a TOML config.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rawsat/detmetrics.hpp"
#include "rawsat/error.hpp"
#include "rawsat/granule_io.hpp"
#include "rawsat/log.hpp"
#include "rawsat/noise.hpp"
#include "rawsat/pansharp.hpp"
#include "rawsat/parallel.hpp"
#include "rawsat/pipeline.hpp"
#include "rawsat/png_io.hpp"
#include "rawsat/resample.hpp"
#include "rawsat/restoration.hpp"
#include "rawsat/sensor_sim.hpp"
#include "rawsat/simd/kernels.hpp"
#include "rawsat/stats.hpp"
#include "rawsat/synthdata.hpp"
#include "rawsat/tiling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rawsat;

namespace {

std::pair<double, double> parse_pair(const std::string& s, const char* what) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument("");
    std::size_t n1 = 0, n2 = 0;
    const double a = std::stod(s.substr(0, colon), &n1);
    const double b = std::stod(s.substr(colon + 1), &n2);
    if (n1 != colon || n2 != s.size() - colon - 1) throw std::invalid_argument("");
    return {a, b};
  } catch (const std::logic_error&) {
    throw ConfigError(std::string(what) + " expects A:B, got '" + s + "'");
  }
}

std::vector<double> parse_list(const std::string& s, const char* what, char sep = ',') {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      std::size_t n = 0;
      out.push_back(std::stod(item, &n));
      if (n != item.size()) throw std::invalid_argument("");
    } catch (const std::logic_error&) {
      throw ConfigError(std::string(what) + ": '" + item + "' is not a number");
    }
  }
  return out;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The named table of a TOML file, or the whole document when it has none.
json toml_section(const fs::path& p, const char* table) {
  json j = toml_to_json(read_text(p));
  return j.contains(table) ? j[table] : j;
}

void print_json(const json& j) { std::cout << j.dump() << "\n"; }

Raster fit_to(const Raster& r, std::size_t w, std::size_t h) {
  if (r.width() == w && r.height() == h) return r;
  if (w % r.width() || w / r.width() != h / r.height()) throw DataError("preview: band grids are not integer multiples");
  const std::size_t k = w / r.width();
  Raster out(w, h, r.gsd() / static_cast<double>(k), r.band_name());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out.at(x, y) = r.at(x / k, y / k);
  return out;
}

// Side-by-side 8-bit panels, each band stretched between its 0.5th and
// 99.5th percentiles.
void write_panels(const fs::path& path, const std::vector<const Raster*>& bands) {
  std::size_t w = 0, h = 0;
  for (const auto* b : bands) {
    w = std::max(w, b->width());
    h = std::max(h, b->height());
  }
  const std::size_t gap = 4;
  Raster sheet(bands.size() * (w + gap) - gap, h, 1.0, "preview");
  std::fill(sheet.values().begin(), sheet.values().end(), 0.0f);
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const Raster r = fit_to(*bands[i], w, h);
    const double lo = percentile(r.values(), 0.5), hi = percentile(r.values(), 99.5);
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        sheet.at(i * (w + gap) + x, y) = static_cast<float>((r.at(x, y) - lo) / span);
  }
  write_png(path, {&sheet}, 8, {0, 1});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rawsat: raw-like satellite data simulation, restoration and detection-dataset tooling"};
  app.require_subcommand(1);
  unsigned threads = 0;
  std::string isa;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");
  app.add_option("--isa", isa, "Force kernel set: scalar | avx2 | neon");

  // noise-fit
  auto* nf = app.add_subcommand("noise-fit", "Fit alpha, beta of sigma^2 = alpha*L + beta from two SNR anchors");
  std::string dark, bright;
  bool db = false;
  std::optional<double> nf_rmax;
  nf->add_option("--dark", dark, "Dark anchor L:SNR")->required();
  nf->add_option("--bright", bright, "Bright anchor L:SNR")->required();
  nf->add_flag("--db", db, "SNR values are in dB");
  nf->add_option("--radiometric-max", nf_rmax, "Check the fit over [0, max]");

  // degrade
  auto* dg = app.add_subcommand("degrade", "Simulate raw-like bands from a high-quality granule");
  fs::path dg_in, dg_out, dg_cfg;
  std::optional<std::uint64_t> dg_seed;
  dg->add_option("--in", dg_in, "Input granule directory")->required();
  dg->add_option("--out", dg_out, "Output granule directory")->required();
  dg->add_option("--config", dg_cfg, "TOML with a [degrade] table");
  dg->add_option("--seed", dg_seed, "Overrides the config seed");

  // restore
  auto* rs = app.add_subcommand("restore", "Restore the raw PAN band");
  fs::path rs_in, rs_out, rs_weights;
  std::string rs_method = "wiener";
  std::optional<double> rs_nsr;
  rs->add_option("--in", rs_in, "Input granule directory")->required();
  rs->add_option("--out", rs_out, "Output granule directory")->required();
  rs->add_option("--method", rs_method, "none | wiener | edsr")->capture_default_str();
  rs->add_option("--weights", rs_weights, "EDSW1 weight file (edsr)");
  rs->add_option("--nsr", rs_nsr, "Wiener noise-to-signal ratio (default: estimated)");

  // pansharpen
  auto* ps = app.add_subcommand("pansharpen", "Brovey fusion of PAN and XS bands");
  fs::path ps_in, ps_out;
  std::string ps_weights;
  bool ps_restored = false;
  ps->add_option("--in", ps_in, "Input granule directory")->required();
  ps->add_option("--out", ps_out, "Output granule directory")->required();
  ps->add_option("--weights", ps_weights, "Comma-separated XS weights (default all 1)");
  ps->add_flag("--restored", ps_restored, "Use the restored PAN band");

  // tile
  auto* tl = app.add_subcommand("tile", "Cut granules into patches and export a detection dataset");
  std::vector<fs::path> tl_in;
  fs::path tl_out;
  TileSpec spec;
  std::string tl_mode = "object-centered", tl_split = "1:0:0", tl_scale, tl_keep;
  std::optional<std::size_t> tl_topk;
  std::uint64_t tl_seed = 0;
  tl->add_option("--in", tl_in, "Input granule directories")->required();
  tl->add_option("--out", tl_out, "Dataset directory")->required();
  tl->add_option("--patch-size", spec.patch_size, "Patch edge in pixels")->capture_default_str();
  tl->add_option("--mode", tl_mode, "grid | object-centered")->capture_default_str();
  tl->add_option("--offset-fraction", spec.offset_fraction, "Max center offset / patch size")->capture_default_str();
  tl->add_option("--min-visibility", spec.min_visibility, "Grid mode: min visible box fraction")
      ->capture_default_str();
  tl->add_option("--bands", spec.bands, "Bands to cut (default PANSHARP_* or PAN)")->delimiter(',');
  tl->add_option("--split", tl_split, "train:val:test fractions")->capture_default_str();
  tl->add_option("--scale", tl_scale, "lo:hi radiance mapped to 16-bit codes (default 0:p99.9)");
  tl->add_option("--keep-classes", tl_keep, "Comma-separated class ids to keep");
  tl->add_option("--top-k", tl_topk, "Keep the k classes with the largest median box area");
  tl->add_option("--seed", tl_seed, "Seed for offsets and split");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score detections against a dataset manifest");
  fs::path ev_gt, ev_pred, ev_out, ev_cfg;
  std::string ev_split, ev_conf, ev_formats = "json,csv,svg";
  ev->add_option("--gt", ev_gt, "Dataset manifest.json")->required();
  ev->add_option("--pred", ev_pred, "Predictions (JSON lines)")->required();
  ev->add_option("--out", ev_out, "Report directory")->required();
  ev->add_option("--split", ev_split, "Evaluate one split only");
  ev->add_option("--config", ev_cfg, "TOML with an [evaluate] table");
  ev->add_option("--confidence", ev_conf, "Comma-separated F1 confidence thresholds");
  ev->add_option("--formats", ev_formats, "Any of json,csv,svg")->capture_default_str();

  // preview
  auto* pv = app.add_subcommand("preview", "Render band panels of a granule as PNG");
  fs::path pv_in, pv_out;
  std::vector<std::string> pv_variants{"source", "raw", "restored", "pansharp"};
  pv->add_option("--in", pv_in, "Granule directory")->required();
  pv->add_option("--out", pv_out, "Output directory")->required();
  pv->add_option("--variants", pv_variants, "source | raw | restored | pansharp")
      ->delimiter(',')
      ->capture_default_str();

  // synth
  auto* sy = app.add_subcommand("synth", "Write a synthetic granule");
  fs::path sy_out, sy_cfg;
  SceneSpec scene;
  sy->add_option("--out", sy_out, "Output granule directory")->required();
  sy->add_option("--config", sy_cfg, "TOML with a [synth] table");
  sy->add_option("--id", scene.id, "Granule id");
  sy->add_option("--width", scene.width, "PAN width");
  sy->add_option("--height", scene.height, "PAN height");
  sy->add_option("--objects", scene.object_count, "Vessel count");
  sy->add_option("--seed", scene.seed, "Scene seed");

  // run
  auto* rn = app.add_subcommand("run", "Run degrade -> restore -> pansharpen -> tile -> export");
  fs::path rn_cfg, rn_out;
  std::string rn_variant = "restored";
  std::optional<std::uint64_t> rn_seed;
  bool rn_overwrite = false;
  rn->add_option("--config", rn_cfg, "Pipeline TOML")->required();
  rn->add_option("--variant", rn_variant, "raw | restored")->capture_default_str();
  rn->add_option("--seed", rn_seed, "Overrides the config seed");
  rn->add_option("--out", rn_out, "Overrides the config output");
  rn->add_flag("--overwrite", rn_overwrite, "Replace an existing output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    set_thread_count(threads);
    if (!isa.empty()) {
      bool ok = false;
      for (auto candidate : {simd::Isa::Scalar, simd::Isa::Avx2, simd::Isa::Neon})
        if (isa == simd::isa_name(candidate)) {
          simd::set_active_isa(candidate);
          ok = true;
        }
      if (!ok) throw ConfigError("unknown --isa '" + isa + "'");
    }

    if (nf->parsed()) {
      const auto [dl, ds] = parse_pair(dark, "--dark");
      const auto [bl, bs] = parse_pair(bright, "--bright");
      const NoiseAnchor d{dl, db ? snr_from_db(ds) : ds}, b{bl, db ? snr_from_db(bs) : bs};
      const NoiseModel m = fit_noise_params(d, b, nf_rmax);
      print_json({{"alpha", m.alpha}, {"beta", m.beta}});
    } else if (dg->parsed()) {
      DegradationConfig cfg = dg_cfg.empty() ? DegradationConfig{} : DegradationConfig::from_json(toml_section(dg_cfg, "degrade"));
      if (dg_seed) cfg.seed = *dg_seed;
      const Granule g = read_granule(dg_in);
      write_granule(degrade(g, cfg), dg_out);
    } else if (rs->parsed()) {
      RestoreConfig cfg;
      cfg.method = restore_method_from_name(rs_method);
      cfg.weights = rs_weights;
      cfg.nsr = rs_nsr;
      cfg.validate();
      write_granule(restore_granule(read_granule(rs_in), cfg), rs_out);
    } else if (ps->parsed()) {
      BroveyWeights w;
      if (!ps_weights.empty()) w.w = parse_list(ps_weights, "--weights");
      write_granule(pansharpen_granule(read_granule(ps_in), w, ps_restored), ps_out);
    } else if (tl->parsed()) {
      spec.mode = tile_mode_from_name(tl_mode);
      spec.seed = tl_seed;
      spec.validate();
      const auto f = parse_list(tl_split, "--split", ':');
      if (f.size() != 3) throw ConfigError("--split expects train:val:test");
      SplitFractions split{f[0], f[1], f[2]};
      split.validate();
      std::vector<Granule> gs;
      for (const auto& p : tl_in) gs.push_back(read_granule(p));
      if (!tl_keep.empty() || tl_topk) {
        std::vector<const Granule*> ptrs;
        for (const auto& g : gs) ptrs.push_back(&g);
        ClassSelection sel = ClassTopK{tl_topk.value_or(6)};
        if (!tl_keep.empty()) {
          std::vector<int> ids;
          for (double v : parse_list(tl_keep, "--keep-classes")) ids.push_back(static_cast<int>(v));
          sel = ClassKeep{ids};
        }
        const ClassFilter f = select_classes(ptrs, sel);
        for (auto& g : gs) g = apply_class_filter(g, f);
      }
      ExportOptions opt;
      opt.split = split;
      opt.seed = tl_seed;
      std::vector<Tile> tiles;
      double hi = 0;
      for (const auto& g : gs) {
        auto res = make_tiles(g, spec);
        for (const auto& w : res.warnings)
          log_event(LogLevel::Warn, "tile_skipped", {{"granule", w.granule}, {"annotation", w.annotation}, {"reason", w.message}});
        for (const auto& b : tile_bands(g, spec)) hi = std::max(hi, percentile(g.band(b).values(), 99.9));
        for (const auto& a : g.annotations) opt.class_names.try_emplace(a.class_id, a.class_name);
        for (auto& t : res.tiles) tiles.push_back(std::move(t));
      }
      if (tl_scale.empty()) {
        opt.scale = {0, hi > 0 ? hi : 1};
      } else {
        const auto [lo, h] = parse_pair(tl_scale, "--scale");
        opt.scale = {lo, h};
      }
      const json m = export_dataset(tiles, tl_out, opt);
      print_json(m["counts"]);
    } else if (ev->parsed()) {
      EvalConfig cfg = ev_cfg.empty() ? EvalConfig{} : EvalConfig::from_json(toml_section(ev_cfg, "evaluate"));
      if (!ev_conf.empty()) cfg.confidence_thresholds = parse_list(ev_conf, "--confidence");
      const GroundTruthSet gt = load_ground_truth(ev_gt, ev_split);
      if (cfg.class_names.empty()) cfg.class_names = gt.class_names;
      const auto dets = load_predictions(ev_pred);
      std::set<std::string> images(gt.image_ids.begin(), gt.image_ids.end());
      std::vector<Detection> kept;
      for (const auto& d : dets) {
        if (images.count(d.image_id)) {
          kept.push_back(d);
        } else if (ev_split.empty()) {
          throw DataError("prediction for unknown image '" + d.image_id + "'");
        }
      }
      const EvalReport r = evaluate(kept, gt.boxes, cfg);
      std::vector<ReportFormat> formats;
      std::stringstream ss(ev_formats);
      for (std::string f; std::getline(ss, f, ',');) {
        if (f == "json") formats.push_back(ReportFormat::Json);
        else if (f == "csv") formats.push_back(ReportFormat::Csv);
        else if (f == "svg") formats.push_back(ReportFormat::Svg);
        else throw ConfigError("unknown report format '" + f + "'");
      }
      report_emit(r, ev_out, formats);
      print_json({{"mAP50", r.map50}, {"mAP50_95", r.map50_95}, {"AP95", r.ap95}, {"mean_tp_iou", r.mean_tp_iou}});
    } else if (pv->parsed()) {
      const Granule g = read_granule(pv_in);
      fs::create_directories(pv_out);
      std::string pan = g.pan_band;
      // Strip a derived suffix to find the source name of each group.
      for (const char* suffix : {"_restored", "_raw"})
        if (pan.size() > std::strlen(suffix) && pan.ends_with(suffix)) pan.resize(pan.size() - std::strlen(suffix));
      std::size_t written = 0;
      for (const auto& v : pv_variants) {
        std::vector<const Raster*> bands;
        auto add = [&](const std::string& name) {
          if (g.has_band(name)) bands.push_back(&g.band(name));
        };
        if (v == "source") {
          add(pan);
          for (const auto& x : g.xs_bands) add(x.ends_with("_raw") ? x.substr(0, x.size() - 4) : x);
        } else if (v == "raw") {
          add(raw_band_name(pan));
          for (const auto& x : g.xs_bands) add(x.ends_with("_raw") ? x : raw_band_name(x));
        } else if (v == "restored") {
          add(restored_band_name(raw_band_name(pan)));
        } else if (v == "pansharp") {
          for (const auto& [name, r] : g.rasters)
            if (name.starts_with("PANSHARP_")) bands.push_back(&r);
        } else {
          throw ConfigError("unknown preview variant '" + v + "'");
        }
        if (bands.empty()) {
          log_event(LogLevel::Warn, "preview_skipped", {{"variant", v}, {"reason", "no bands"}});
          continue;
        }
        write_panels(pv_out / (g.id + "_" + v + ".png"), bands);
        ++written;
      }
      print_json({{"written", written}});
    } else if (sy->parsed()) {
      if (!sy_cfg.empty()) {
        // Explicit flags win over the file.
        SceneSpec s = SceneSpec::from_json(toml_section(sy_cfg, "synth"));
        if (sy->count("--id")) s.id = scene.id;
        if (sy->count("--width")) s.width = scene.width;
        if (sy->count("--height")) s.height = scene.height;
        if (sy->count("--objects")) s.object_count = scene.object_count;
        if (sy->count("--seed")) s.seed = scene.seed;
        scene = s;
      }
      scene.validate();
      write_granule(synth_granule(scene), sy_out);
    } else if (rn->parsed()) {
      PipelineConfig cfg = load_pipeline_config(rn_cfg);
      if (rn_seed) {
        cfg.seed = cfg.degrade.seed = cfg.tile.seed = *rn_seed;
      }
      if (!rn_out.empty()) cfg.output = rn_out;
      if (rn_overwrite) cfg.overwrite = true;
      const json m = run_pipeline(cfg, variant_from_name(rn_variant));
      print_json({{"variant", m["variant"]}, {"counts", m["counts"]}});
    }
    log_event(LogLevel::Info, "command_done",
              {{"command", app.get_subcommands().front()->get_name()},
               {"threads", thread_count()},
               {"ms", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()}});
  } catch (const ConfigError& e) {
    std::cerr << "rawsat: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "rawsat: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "rawsat: internal error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
