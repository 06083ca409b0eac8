#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "rawsat/raster.hpp"

namespace rawsat::testing {

inline Raster random_raster(std::size_t w, std::size_t h, std::uint32_t seed, float lo = 0.0f,
                            float hi = 1000.0f, const std::string& name = "PAN", double gsd = 0.5) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> d(lo, hi);
  Raster r(w, h, gsd, name);
  for (float& v : r.values()) v = d(gen);
  return r;
}

inline Raster constant_raster(std::size_t w, std::size_t h, float c, const std::string& name = "PAN",
                              double gsd = 0.5) {
  Raster r(w, h, gsd, name);
  for (float& v : r.values()) v = c;
  return r;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("rawsat_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Relative path -> file bytes for every regular file under root.
inline std::map<std::string, std::string> tree_bytes(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[std::filesystem::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return out;
}

/// Structural JSON equality with numbers compared to an absolute tolerance.
/// Returns the path of the first difference, empty when equal.
inline std::string json_diff(const nlohmann::json& a, const nlohmann::json& b, double tol,
                             const std::string& at = "") {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    return std::abs(x - y) <= tol ? "" : at + ": " + a.dump() + " vs " + b.dump();
  }
  if (a.type() != b.type()) return at + ": " + a.dump() + " vs " + b.dump();
  if (a.is_object()) {
    if (a.size() != b.size()) return at + ": key count";
    for (const auto& [k, v] : a.items()) {
      if (!b.contains(k)) return at + "/" + k + ": missing";
      if (auto d = json_diff(v, b[k], tol, at + "/" + k); !d.empty()) return d;
    }
    return "";
  }
  if (a.is_array()) {
    if (a.size() != b.size()) return at + ": length";
    for (std::size_t i = 0; i < a.size(); ++i)
      if (auto d = json_diff(a[i], b[i], tol, at + "[" + std::to_string(i) + "]"); !d.empty()) return d;
    return "";
  }
  return a == b ? "" : at + ": " + a.dump() + " vs " + b.dump();
}

}  // namespace rawsat::testing
