#include "rawsat/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "rawsat/error.hpp"
#include "rawsat/parallel.hpp"
#include "rawsat/rng.hpp"

namespace rawsat {
using nlohmann::json;

const char* tile_mode_name(TileMode m) { return m == TileMode::Grid ? "grid" : "object-centered"; }

TileMode tile_mode_from_name(const std::string& name) {
  if (name == "grid") return TileMode::Grid;
  if (name == "object-centered" || name == "object_centered") return TileMode::ObjectCentered;
  throw ConfigError("unknown tile mode '" + name + "' (expected grid or object-centered)");
}

void TileSpec::validate() const {
  if (patch_size < 32) throw ConfigError("patch_size must be >= 32");
  if (!(offset_fraction >= 0 && offset_fraction < 1)) throw ConfigError("offset_fraction must be in [0, 1)");
  if (!(min_visibility > 0 && min_visibility <= 1)) throw ConfigError("min_visibility must be in (0, 1]");
}

json TileSpec::to_json() const {
  return {{"patch_size", patch_size},       {"mode", tile_mode_name(mode)}, {"offset_fraction", offset_fraction},
          {"min_visibility", min_visibility}, {"seed", seed},               {"bands", bands}};
}

TileSpec TileSpec::from_json(const json& j) {
  TileSpec s;
  try {
    s.patch_size = j.value("patch_size", s.patch_size);
    if (j.contains("mode")) s.mode = tile_mode_from_name(j["mode"].get<std::string>());
    s.offset_fraction = j.value("offset_fraction", s.offset_fraction);
    s.min_visibility = j.value("min_visibility", s.min_visibility);
    s.seed = j.value("seed", s.seed);
    s.bands = j.value("bands", s.bands);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("[tile]: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<std::string> tile_bands(const Granule& g, const TileSpec& spec) {
  if (!spec.bands.empty()) return spec.bands;
  std::vector<std::string> out;
  for (const auto& name : g.xs_bands) {
    std::string base = name.ends_with("_raw") ? name.substr(0, name.size() - 4) : name;
    if (g.has_band("PANSHARP_" + base)) out.push_back("PANSHARP_" + base);
  }
  if (out.empty()) out.push_back(g.pan_band);
  return out;
}

namespace {

std::vector<const Raster*> resolve_bands(const Granule& g, const TileSpec& spec) {
  std::vector<const Raster*> out;
  const Raster& pan = g.pan();
  for (const auto& name : tile_bands(g, spec)) {
    if (!g.has_band(name)) throw DataError("tiling: missing band '" + name + "'");
    const Raster& r = g.band(name);
    if (!r.same_shape(pan)) throw SchemaError("tiling: band '" + name + "' is not on the PAN grid");
    out.push_back(&r);
  }
  if (pan.width() < spec.patch_size || pan.height() < spec.patch_size) {
    throw ConfigError("patch_size " + std::to_string(spec.patch_size) + " exceeds granule " + g.id + " (" +
                      std::to_string(pan.width()) + "x" + std::to_string(pan.height()) + ")");
  }
  return out;
}

std::vector<Raster> crop(const std::vector<const Raster*>& bands, std::size_t x0, std::size_t y0, std::size_t ps) {
  std::vector<Raster> out;
  for (const Raster* r : bands) {
    Raster p(ps, ps, r->gsd(), r->band_name());
    for (std::size_t y = 0; y < ps; ++y) {
      const auto src = r->row(y0 + y);
      std::copy(src.begin() + static_cast<std::ptrdiff_t>(x0), src.begin() + static_cast<std::ptrdiff_t>(x0 + ps),
                p.row(y).begin());
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::size_t> grid_origins(std::size_t n, std::size_t ps) {
  std::vector<std::size_t> o;
  for (std::size_t x = 0; x + ps <= n; x += ps) o.push_back(x);
  if (n % ps != 0) o.push_back(n - ps);
  return o;
}

bool inside(const BBox& b, double x0, double y0, double ps) {
  return b.xmin >= x0 && b.ymin >= y0 && b.xmax <= x0 + ps && b.ymax <= y0 + ps;
}

Annotation to_patch(Annotation a, double x0, double y0) {
  a.bbox = {a.bbox.xmin - x0, a.bbox.ymin - y0, a.bbox.xmax - x0, a.bbox.ymax - y0};
  return a;
}

}  // namespace

TilingResult tile_grid(const Granule& g, const TileSpec& spec) {
  spec.validate();
  const auto bands = resolve_bands(g, spec);
  const std::size_t ps = spec.patch_size;
  const auto xs = grid_origins(g.pan().width(), ps);
  const auto ys = grid_origins(g.pan().height(), ps);
  TilingResult res;
  res.tiles.resize(xs.size() * ys.size());
  parallel_for(res.tiles.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Tile& t = res.tiles[i];
      t.x0 = xs[i % xs.size()];
      t.y0 = ys[i / xs.size()];
      t.source_granule = g.id;
      t.image = crop(bands, t.x0, t.y0, ps);
      const double x0 = static_cast<double>(t.x0), y0 = static_cast<double>(t.y0), s = static_cast<double>(ps);
      for (const auto& a : g.annotations) {
        const BBox c{std::max(a.bbox.xmin, x0), std::max(a.bbox.ymin, y0), std::min(a.bbox.xmax, x0 + s),
                     std::min(a.bbox.ymax, y0 + s)};
        if (!c.valid()) continue;
        if (c.area() < spec.min_visibility * a.bbox.area()) continue;
        Annotation clipped = a;
        clipped.bbox = c;
        t.labels.push_back(to_patch(clipped, x0, y0));
      }
    }
  });
  return res;
}

TilingResult tile_object_centered(const Granule& g, const TileSpec& spec) {
  spec.validate();
  const auto bands = resolve_bands(g, spec);
  const long ps = static_cast<long>(spec.patch_size);
  const long W = static_cast<long>(g.pan().width()), H = static_cast<long>(g.pan().height());
  const std::size_t n = g.annotations.size();
  std::vector<std::optional<Tile>> slots(n);
  std::vector<std::string> problems(n);
  const std::uint64_t granule_stream = hash_label(g.id);

  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const BBox& box = g.annotations[i].bbox;
      const long fx0 = static_cast<long>(std::floor(box.xmin)), fx1 = static_cast<long>(std::ceil(box.xmax));
      const long fy0 = static_cast<long>(std::floor(box.ymin)), fy1 = static_cast<long>(std::ceil(box.ymax));
      if (fx1 - fx0 > ps || fy1 - fy0 > ps) {
        problems[i] = "annotation footprint " + std::to_string(fx1 - fx0) + "x" + std::to_string(fy1 - fy0) +
                      " exceeds patch size " + std::to_string(ps) + "; tile skipped";
        continue;
      }
      Rng rng(spec.seed, combine_stream(granule_stream, i));
      const double span = spec.offset_fraction * static_cast<double>(ps);
      const double ox = (2.0 * rng.next_uniform() - 1.0) * span;
      const double oy = (2.0 * rng.next_uniform() - 1.0) * span;
      const double cx = 0.5 * (box.xmin + box.xmax), cy = 0.5 * (box.ymin + box.ymax);
      long x0 = static_cast<long>(std::floor(cx - 0.5 * static_cast<double>(ps) + ox));
      long y0 = static_cast<long>(std::floor(cy - 0.5 * static_cast<double>(ps) + oy));
      // Containment window first, then the granule; the two intersect
      // because the box lies inside the granule.
      x0 = std::clamp(std::clamp(x0, fx1 - ps, fx0), 0L, W - ps);
      y0 = std::clamp(std::clamp(y0, fy1 - ps, fy0), 0L, H - ps);
      Tile t;
      t.x0 = static_cast<std::size_t>(x0);
      t.y0 = static_cast<std::size_t>(y0);
      t.source_granule = g.id;
      t.seed_annotation = i;
      t.image = crop(bands, t.x0, t.y0, spec.patch_size);
      const double dx = static_cast<double>(x0), dy = static_cast<double>(y0);
      for (const auto& a : g.annotations) {
        if (inside(a.bbox, dx, dy, static_cast<double>(ps))) t.labels.push_back(to_patch(a, dx, dy));
      }
      slots[i] = std::move(t);
    }
  });
  TilingResult res;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) res.tiles.push_back(std::move(*slots[i]));
    if (!problems[i].empty()) res.warnings.push_back({g.id, i, problems[i]});
  }
  return res;
}

TilingResult make_tiles(const Granule& g, const TileSpec& spec) {
  return spec.mode == TileMode::Grid ? tile_grid(g, spec) : tile_object_centered(g, spec);
}

json ClassFilter::to_json() const {
  json m = json::array();
  for (const auto& [old_id, new_id] : remap) {
    m.push_back({{"source_class_id", old_id}, {"class_id", new_id}, {"class_name", names.at(new_id)}});
  }
  return m;
}

ClassFilter select_classes(const std::vector<const Granule*>& granules, const ClassSelection& sel) {
  std::map<int, std::string> seen;
  std::map<int, std::vector<double>> areas;
  for (const Granule* g : granules) {
    for (const auto& a : g->annotations) {
      seen.emplace(a.class_id, a.class_name);
      areas[a.class_id].push_back(a.bbox.area());
    }
  }
  std::vector<int> keep;
  if (const auto* k = std::get_if<ClassKeep>(&sel)) {
    keep = k->ids;
    for (int id : keep) {
      if (!seen.count(id)) throw ConfigError("class filter: class id " + std::to_string(id) + " does not occur");
    }
  } else {
    const std::size_t k_top = std::get<ClassTopK>(sel).k;
    std::vector<std::pair<double, int>> ranked;
    for (auto& [id, v] : areas) {
      std::sort(v.begin(), v.end());
      const std::size_t m = v.size();
      const double median = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
      ranked.push_back({median, id});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; i < ranked.size() && i < k_top; ++i) keep.push_back(ranked[i].second);
  }
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  ClassFilter f;
  int next = 0;
  for (int id : keep) {
    f.remap[id] = next;
    f.names[next] = seen[id];
    ++next;
  }
  return f;
}

Granule apply_class_filter(const Granule& g, const ClassFilter& f) {
  Granule out = g;
  out.annotations.clear();
  for (Annotation a : g.annotations) {
    auto it = f.remap.find(a.class_id);
    if (it == f.remap.end()) continue;
    a.class_id = it->second;
    out.annotations.push_back(std::move(a));
  }
  out.provenance.push_back({"filter_classes", {{"class_map", f.to_json()}, {"kept", out.annotations.size()}}, 0});
  return out;
}

Granule filter_classes(const Granule& g, const ClassSelection& sel) {
  return apply_class_filter(g, select_classes({&g}, sel));
}

void SplitFractions::validate() const {
  if (train < 0 || val < 0 || test < 0) throw ConfigError("split fractions must be >= 0");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

std::string split_for_granule(const std::string& granule_id, const SplitFractions& f, std::uint64_t seed) {
  const std::uint64_t h = mix64(combine_stream(hash_label(granule_id), hash_label("split")) ^ seed);
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  if (u < f.train) return "train";
  if (u < f.train + f.val) return "val";
  return "test";
}

std::string yolo_line(const Annotation& a, std::size_t patch_size, int decimals) {
  const double s = static_cast<double>(patch_size);
  const double v[4] = {0.5 * (a.bbox.xmin + a.bbox.xmax) / s, 0.5 * (a.bbox.ymin + a.bbox.ymax) / s,
                       a.bbox.width() / s, a.bbox.height() / s};
  std::string line = std::to_string(a.class_id);
  char buf[64];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, " %.*f", decimals, x);
    line += buf;
  }
  return line;
}

void write_manifest(const json& manifest, const std::filesystem::path& dir) {
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw Error("failed to write " + (dir / "manifest.json").string());
}

json export_dataset(const std::vector<Tile>& tiles, const std::filesystem::path& dir, const ExportOptions& opt) {
  if (tiles.empty()) throw DataError("export_dataset: no tiles to export");
  opt.split.validate();
  namespace fs = std::filesystem;
  const std::size_t ps = tiles.front().image.at(0).width();
  std::map<std::string, std::size_t> per_granule;
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts{{"train", {0, 0}}, {"val", {0, 0}}, {"test", {0, 0}}};
  json entries = json::array();
  std::set<int> used_classes;
  for (const Tile& t : tiles) {
    if (t.image.empty() || (t.image.size() != 1 && t.image.size() != 3)) {
      throw ConfigError("export_dataset: tiles need 1 or 3 bands, got " + std::to_string(t.image.size()));
    }
    if (t.image[0].width() != ps) throw SchemaError("export_dataset: tiles differ in patch size");
    const std::string split = split_for_granule(t.source_granule, opt.split, opt.seed);
    char idx[16];
    std::snprintf(idx, sizeof idx, "%05zu", per_granule[t.source_granule]++);
    const std::string name = t.source_granule + "_" + idx;
    const std::string image = "images/" + split + "/" + name + ".png";
    const std::string label = "labels/" + split + "/" + name + ".txt";
    fs::create_directories(dir / "images" / split);
    fs::create_directories(dir / "labels" / split);

    std::vector<const Raster*> bands;
    for (const auto& r : t.image) bands.push_back(&r);
    write_png(dir / image, bands, 16, opt.scale);

    std::ofstream lf(dir / label, std::ios::binary | std::ios::trunc);
    json labels = json::array();
    for (const auto& a : t.labels) {
      lf << yolo_line(a, ps, opt.label_decimals) << '\n';
      const double s = static_cast<double>(ps);
      labels.push_back({a.class_id, 0.5 * (a.bbox.xmin + a.bbox.xmax) / s, 0.5 * (a.bbox.ymin + a.bbox.ymax) / s,
                        a.bbox.width() / s, a.bbox.height() / s});
      used_classes.insert(a.class_id);
    }
    if (!lf) throw Error("failed to write " + (dir / label).string());
    json e{{"image", image},
           {"label", label},
           {"split", split},
           {"granule", t.source_granule},
           {"origin", {t.x0, t.y0}},
           {"bands", json::array()},
           {"labels", labels}};
    for (const auto& r : t.image) e["bands"].push_back(r.band_name());
    if (t.seed_annotation) e["seed_annotation"] = *t.seed_annotation;
    entries.push_back(std::move(e));
    auto& c = counts[split];
    c.first += 1;
    c.second += t.labels.size();
  }
  json class_map = json::object();
  for (int id : used_classes) {
    auto it = opt.class_names.find(id);
    class_map[std::to_string(id)] = it == opt.class_names.end() ? "class_" + std::to_string(id) : it->second;
  }
  for (const auto& [id, name] : opt.class_names) class_map[std::to_string(id)] = name;
  json cj = json::object();
  for (const auto& [s, c] : counts) cj[s] = {{"tiles", c.first}, {"objects", c.second}};
  json m{{"format", "yolo-txt"},
         {"patch_size", ps},
         {"label_decimals", opt.label_decimals},
         {"split_fractions", {{"train", opt.split.train}, {"val", opt.split.val}, {"test", opt.split.test}}},
         {"seed", opt.seed},
         {"png_scale", opt.scale.to_json()},
         {"class_map", class_map},
         {"counts", cj},
         {"tiles", entries}};
  write_manifest(m, dir);
  return m;
}

}  // namespace rawsat
