#include "rawsat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rawsat/error.hpp"

namespace rawsat {
namespace {

constexpr std::size_t kLeaf = 64;

template <typename T>
double pairwise(const T* v, std::size_t n) {
  if (n <= kLeaf) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(v[i]);
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise(v, half) + pairwise(v + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const float> v) { return pairwise(v.data(), v.size()); }
double pairwise_sum(std::span<const double> v) { return pairwise(v.data(), v.size()); }

MeanVar mean_variance(std::span<const float> v) {
  MeanVar r;
  r.count = v.size();
  if (v.empty()) return r;
  r.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() < 2) return r;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = static_cast<double>(v[i]) - r.mean;
    sq[i] = d * d;
  }
  r.variance = pairwise_sum(std::span<const double>(sq)) / static_cast<double>(v.size() - 1);
  return r;
}

double percentile(std::span<const float> v, double p) {
  if (v.empty()) throw DataError("percentile of an empty sample");
  std::vector<float> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(s.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return static_cast<double>(s[lo]) * (1 - t) + static_cast<double>(s[hi]) * t;
}

double psnr(std::span<const float> reference, std::span<const float> test, double peak) {
  if (reference.size() != test.size() || reference.empty()) {
    throw SchemaError("psnr: sample sizes differ");
  }
  std::vector<double> sq(reference.size());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const double d = static_cast<double>(reference[i]) - static_cast<double>(test[i]);
    sq[i] = d * d;
  }
  const double mse = pairwise_sum(std::span<const double>(sq)) / static_cast<double>(sq.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace rawsat
