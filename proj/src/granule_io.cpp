#include "rawsat/granule_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "rawsat/error.hpp"

namespace rawsat {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

void write_band(const Raster& r, const fs::path& file) {
  std::vector<std::uint32_t> words(r.size());
  std::memcpy(words.data(), r.values().data(), r.size() * sizeof(float));
  for (auto& w : words) w = to_le(w);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + file.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (!out) throw Error("failed writing '" + file.string() + "'");
}

std::vector<float> read_band(const std::string& name, const fs::path& file, std::size_t expected) {
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) {
    throw FormatError("band '" + name + "': missing file '" + file.filename().string() + "'");
  }
  const auto bytes = fs::file_size(file);
  if (bytes != expected * sizeof(float)) {
    const std::string msg = "band '" + name + "': band size mismatch (file holds " +
                            std::to_string(bytes / sizeof(float)) + " values, meta declares " +
                            std::to_string(expected) + ")";
    if (bytes > expected * sizeof(float)) throw FormatError(msg);
    throw SchemaError(msg);
  }
  std::vector<std::uint32_t> words(expected);
  std::ifstream in(file, std::ios::binary);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw FormatError("band '" + name + "': unexpected end of file");
  for (auto& w : words) w = to_le(w);
  std::vector<float> values(expected);
  std::memcpy(values.data(), words.data(), bytes);
  return values;
}

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(where + ": key '" + key + "' has the wrong type");
  }
}

}  // namespace

json to_json(const Annotation& a) {
  return {{"class_id", a.class_id},
          {"class_name", a.class_name},
          {"bbox", {a.bbox.xmin, a.bbox.ymin, a.bbox.xmax, a.bbox.ymax}}};
}

Annotation annotation_from_json(const json& j) {
  Annotation a;
  a.class_id = required<int>(j, "class_id", "annotation");
  a.class_name = j.value("class_name", std::string{});
  const auto b = required<std::vector<double>>(j, "bbox", "annotation");
  if (b.size() != 4) throw SchemaError("annotation: bbox must have 4 numbers");
  a.bbox = {b[0], b[1], b[2], b[3]};
  return a;
}

json to_json(const ProvenanceRecord& p) {
  return {{"op", p.op}, {"params", p.params}, {"seed", p.seed}};
}

ProvenanceRecord provenance_from_json(const json& j) {
  ProvenanceRecord p;
  p.op = required<std::string>(j, "op", "provenance");
  p.params = j.value("params", json::object());
  p.seed = j.value("seed", std::uint64_t{0});
  return p;
}

json granule_meta(const Granule& g) {
  json bands = json::array();
  for (const auto& [name, r] : g.rasters) {
    bands.push_back({{"name", name},
                     {"width", r.width()},
                     {"height", r.height()},
                     {"gsd_m", r.gsd()},
                     {"file", name + ".bin"}});
  }
  json annotations = json::array();
  for (const auto& a : g.annotations) annotations.push_back(to_json(a));
  json provenance = json::array();
  for (const auto& p : g.provenance) provenance.push_back(to_json(p));
  return {{"id", g.id},
          {"bands", bands},
          {"pan_band", g.pan_band},
          {"xs_bands", g.xs_bands},
          {"pan_xs_ratio", g.pan_xs_ratio()},
          {"annotations", annotations},
          {"provenance", provenance}};
}

void write_granule(const Granule& g, const fs::path& dir) {
  g.validate();
  fs::create_directories(dir);
  for (const auto& [name, r] : g.rasters) write_band(r, dir / (name + ".bin"));
  std::ofstream meta(dir / "meta.json", std::ios::trunc);
  if (!meta) throw Error("cannot write '" + (dir / "meta.json").string() + "'");
  meta << granule_meta(g).dump(2) << "\n";
}

Granule read_granule(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  std::ifstream in(meta_path);
  if (!in) throw FormatError("granule '" + dir.string() + "': missing meta.json");
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("granule '" + dir.string() + "': meta.json is not valid JSON: " + e.what());
  }
  Granule g;
  g.id = required<std::string>(meta, "id", "meta.json");
  g.pan_band = required<std::string>(meta, "pan_band", "meta.json");
  g.xs_bands = meta.value("xs_bands", std::vector<std::string>{});
  for (const auto& b : required<json>(meta, "bands", "meta.json")) {
    const auto name = required<std::string>(b, "name", "band entry");
    const auto w = required<std::size_t>(b, "width", "band '" + name + "'");
    const auto h = required<std::size_t>(b, "height", "band '" + name + "'");
    const auto gsd = required<double>(b, "gsd_m", "band '" + name + "'");
    const auto file = b.value("file", name + ".bin");
    if (w == 0 || h == 0) throw SchemaError("band '" + name + "': dimensions must be positive");
    g.put(Raster(w, h, gsd, name, read_band(name, dir / file, w * h)));
  }
  for (const auto& a : meta.value("annotations", json::array())) {
    g.annotations.push_back(annotation_from_json(a));
  }
  for (const auto& p : meta.value("provenance", json::array())) {
    g.provenance.push_back(provenance_from_json(p));
  }
  g.validate();
  if (meta.contains("pan_xs_ratio") && meta["pan_xs_ratio"].get<std::size_t>() != g.pan_xs_ratio()) {
    throw SchemaError("granule '" + g.id + "': pan_xs_ratio " + meta["pan_xs_ratio"].dump() +
                      " does not match band dimensions (" + std::to_string(g.pan_xs_ratio()) + ")");
  }
  return g;
}

}  // namespace rawsat
