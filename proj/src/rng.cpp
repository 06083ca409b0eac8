#include "rawsat/rng.hpp"

#include <cmath>
#include <numbers>

namespace rawsat {

void Rng::normals_at(std::uint64_t raw_base, std::uint64_t first_normal, std::span<float> out) const {
  std::size_t j = 0;
  std::uint64_t i = first_normal;
  while (j < out.size()) {
    const std::uint64_t pair = i / 2;
    const std::uint64_t a = at(raw_base + 2 * pair);
    const std::uint64_t b = at(raw_base + 2 * pair + 1);
    const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;        // [0, 1)
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    if (i % 2 == 0) {
      out[j++] = static_cast<float>(radius * std::cos(theta));
      ++i;
      if (j == out.size()) break;
    }
    out[j++] = static_cast<float>(radius * std::sin(theta));
    ++i;
  }
}

std::vector<float> rng_normal(Rng& rng, std::size_t n) {
  std::vector<float> out(n);
  rng.normals_at(rng.position(), 0, out);
  rng.skip(2 * ((n + 1) / 2));
  return out;
}

}  // namespace rawsat
