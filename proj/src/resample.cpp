#include "rawsat/resample.hpp"

#include <cmath>
#include <vector>

#include "rawsat/error.hpp"
#include "rawsat/parallel.hpp"

namespace rawsat {

std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::ptrdiff_t symmetric_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

void catmull_rom_weights(double t, double w[4]) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  w[0] = -0.5 * t3 + t2 - 0.5 * t;
  w[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
  w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
  w[3] = 0.5 * t3 - 0.5 * t2;
}

Raster downsample_block(const Raster& r, std::size_t factor) {
  if (factor == 0) throw ConfigError("downsample factor must be >= 1");
  if (factor == 1) return r;
  if (r.width() % factor != 0 || r.height() % factor != 0) {
    throw SchemaError("band '" + r.band_name() + "': " + std::to_string(r.width()) + "x" +
                      std::to_string(r.height()) + " is not divisible by factor " +
                      std::to_string(factor));
  }
  const std::size_t ow = r.width() / factor;
  const std::size_t oh = r.height() / factor;
  Raster out(ow, oh, r.gsd() * static_cast<double>(factor), r.band_name());
  const double inv = 1.0 / static_cast<double>(factor * factor);
  parallel_for(
      oh,
      [&](std::size_t y0, std::size_t y1) {
        for (std::size_t oy = y0; oy < y1; ++oy) {
          for (std::size_t ox = 0; ox < ow; ++ox) {
            double s = 0;
            for (std::size_t dy = 0; dy < factor; ++dy) {
              const auto row = r.row(oy * factor + dy);
              for (std::size_t dx = 0; dx < factor; ++dx) {
                s += static_cast<double>(row[ox * factor + dx]);
              }
            }
            out.at(ox, oy) = static_cast<float>(s * inv);
          }
        }
      },
      16);
  return out;
}

namespace {

struct Taps {
  std::ptrdiff_t first;  // index of the tap at offset -1
  double w[4];
};

std::vector<Taps> bicubic_taps(std::size_t in_n, std::size_t factor) {
  std::vector<Taps> taps(in_n * factor);
  for (std::size_t o = 0; o < taps.size(); ++o) {
    const double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
    const double base = std::floor(src);
    taps[o].first = static_cast<std::ptrdiff_t>(base) - 1;
    catmull_rom_weights(src - base, taps[o].w);
  }
  return taps;
}

}  // namespace

Raster upsample_bicubic(const Raster& r, std::size_t factor) {
  if (factor == 0) throw ConfigError("upsample factor must be >= 1");
  if (factor == 1) return r;
  const std::size_t iw = r.width(), ih = r.height();
  const std::size_t ow = iw * factor, oh = ih * factor;
  const auto tx = bicubic_taps(iw, factor);
  const auto ty = bicubic_taps(ih, factor);

  // Horizontal pass into a float buffer ih x ow.
  std::vector<float> tmp(ih * ow);
  parallel_for(
      ih,
      [&](std::size_t y0, std::size_t y1) {
        for (std::size_t y = y0; y < y1; ++y) {
          const auto row = r.row(y);
          float* dst = tmp.data() + y * ow;
          for (std::size_t x = 0; x < ow; ++x) {
            double s = 0;
            for (int k = 0; k < 4; ++k) {
              const auto i = clamp_index(tx[x].first + k, static_cast<std::ptrdiff_t>(iw));
              s += tx[x].w[k] * static_cast<double>(row[static_cast<std::size_t>(i)]);
            }
            dst[x] = static_cast<float>(s);
          }
        }
      },
      8);

  Raster out(ow, oh, r.gsd() / static_cast<double>(factor), r.band_name());
  parallel_for(
      oh,
      [&](std::size_t y0, std::size_t y1) {
        for (std::size_t y = y0; y < y1; ++y) {
          const float* src[4];
          for (int k = 0; k < 4; ++k) {
            const auto i = clamp_index(ty[y].first + k, static_cast<std::ptrdiff_t>(ih));
            src[k] = tmp.data() + static_cast<std::size_t>(i) * ow;
          }
          auto dst = out.row(y);
          for (std::size_t x = 0; x < ow; ++x) {
            double s = 0;
            for (int k = 0; k < 4; ++k) s += ty[y].w[k] * static_cast<double>(src[k][x]);
            dst[x] = static_cast<float>(s);
          }
        }
      },
      8);
  return out;
}

}  // namespace rawsat
