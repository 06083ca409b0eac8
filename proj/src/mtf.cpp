#include "rawsat/mtf.hpp"

#include <cmath>
#include <numbers>

#include "rawsat/error.hpp"
#include "rawsat/parallel.hpp"
#include "rawsat/resample.hpp"
#include "rawsat/simd/kernels.hpp"

namespace rawsat {

void MtfSpec::validate() const {
  if (!(mtf_at_nyquist > 0 && mtf_at_nyquist <= 1)) {
    throw ConfigError("mtf_at_nyquist must be in (0, 1], got " + std::to_string(mtf_at_nyquist));
  }
  if (kernel_half_width < 1) throw ConfigError("kernel_half_width must be >= 1");
}

double MtfSpec::target_response(double f) const {
  return std::exp(4.0 * f * f * std::log(mtf_at_nyquist));
}

std::vector<double> mtf_kernel(const MtfSpec& spec) {
  spec.validate();
  const int hw = spec.kernel_half_width;
  std::vector<double> taps(2 * hw + 1, 0.0);
  if (spec.mtf_at_nyquist == 1.0) {
    taps[hw] = 1.0;
    return taps;
  }
  // Cosine-series coefficients c[n] = 2 * integral_0^0.5 H(f) cos(2 pi f n) df
  // by composite Simpson; the response is c[0] + 2 sum c[n] cos(2 pi f n).
  constexpr int kIntervals = 4096;
  const double step = 0.5 / kIntervals;
  std::vector<double> c(hw + 1, 0.0);
  for (int n = 0; n <= hw; ++n) {
    double s = 0;
    for (int i = 0; i <= kIntervals; ++i) {
      const double f = i * step;
      const double wgt = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      s += wgt * spec.target_response(f) * std::cos(2.0 * std::numbers::pi * f * n);
    }
    c[n] = 2.0 * s * step / 3.0;
  }
  // Minimum-norm correction under the L2 metric of the response on [0, 0.5]
  // (weight 1/2 on c[0], 1 on the others) so that response(0) = 1 and
  // response(0.5) = m exactly. Constraint rows: dc = [1, 2, 2, ...],
  // nyq = [1, -2, 2, -2, ...]; inverse metric diag(2, 1, 1, ...).
  std::vector<double> dc(hw + 1), nyq(hw + 1), inv_metric(hw + 1, 1.0);
  inv_metric[0] = 2.0;
  double r_dc = 1.0, r_nyq = spec.mtf_at_nyquist;
  for (int n = 0; n <= hw; ++n) {
    dc[n] = n == 0 ? 1.0 : 2.0;
    nyq[n] = n == 0 ? 1.0 : (n % 2 ? -2.0 : 2.0);
    r_dc -= dc[n] * c[n];
    r_nyq -= nyq[n] * c[n];
  }
  double g00 = 0, g01 = 0, g11 = 0;
  for (int n = 0; n <= hw; ++n) {
    g00 += dc[n] * inv_metric[n] * dc[n];
    g01 += dc[n] * inv_metric[n] * nyq[n];
    g11 += nyq[n] * inv_metric[n] * nyq[n];
  }
  const double det = g00 * g11 - g01 * g01;
  const double l0 = (g11 * r_dc - g01 * r_nyq) / det;
  const double l1 = (g00 * r_nyq - g01 * r_dc) / det;
  for (int n = 0; n <= hw; ++n) {
    c[n] += inv_metric[n] * (l0 * dc[n] + l1 * nyq[n]);
  }
  for (int n = 0; n <= hw; ++n) {
    taps[hw + n] = c[n];
    taps[hw - n] = c[n];
  }
  return taps;
}

double kernel_response(const std::vector<double>& taps, double f) {
  const int hw = static_cast<int>(taps.size() / 2);
  double r = taps[hw];
  for (int n = 1; n <= hw; ++n) r += 2.0 * taps[hw + n] * std::cos(2.0 * std::numbers::pi * f * n);
  return r;
}

Raster convolve_separable(const Raster& r, const std::vector<float>& taps) {
  if (taps.size() % 2 == 0) throw ConfigError("separable kernel needs an odd tap count");
  const auto& k = simd::kernels();
  const std::size_t w = r.width(), h = r.height(), nt = taps.size();
  const std::ptrdiff_t hw = static_cast<std::ptrdiff_t>(nt / 2);

  Raster tmp(w, h, r.gsd(), r.band_name());
  parallel_for(
      h,
      [&](std::size_t y0, std::size_t y1) {
        std::vector<float> padded(w + nt - 1);
        std::vector<const float*> rows(nt);
        for (std::size_t y = y0; y < y1; ++y) {
          const auto src = r.row(y);
          for (std::size_t i = 0; i < padded.size(); ++i) {
            padded[i] = src[static_cast<std::size_t>(
                symmetric_index(static_cast<std::ptrdiff_t>(i) - hw, static_cast<std::ptrdiff_t>(w)))];
          }
          for (std::size_t t = 0; t < nt; ++t) rows[t] = padded.data() + t;
          k.weighted_row_sum(tmp.row(y).data(), rows.data(), taps.data(), nt, w, false);
        }
      },
      16);

  Raster out(w, h, r.gsd(), r.band_name());
  parallel_for(
      h,
      [&](std::size_t y0, std::size_t y1) {
        std::vector<const float*> rows(nt);
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t t = 0; t < nt; ++t) {
            const auto sy = symmetric_index(static_cast<std::ptrdiff_t>(y + t) - hw,
                                          static_cast<std::ptrdiff_t>(h));
            rows[t] = tmp.row(static_cast<std::size_t>(sy)).data();
          }
          k.weighted_row_sum(out.row(y).data(), rows.data(), taps.data(), nt, w, false);
        }
      },
      16);
  return out;
}

Raster apply_mtf(const Raster& r, const MtfSpec& spec) {
  const auto taps = mtf_kernel(spec);
  if (spec.mtf_at_nyquist == 1.0) return r;
  return convolve_separable(r, std::vector<float>(taps.begin(), taps.end()));
}

}  // namespace rawsat
