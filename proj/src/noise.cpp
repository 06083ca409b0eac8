#include "rawsat/noise.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rawsat/error.hpp"
#include "rawsat/parallel.hpp"
#include "rawsat/simd/kernels.hpp"
#include "rawsat/stats.hpp"

namespace rawsat {

void NoiseModel::check_range(double radiometric_max) const {
  // Linear in L, so the endpoints decide.
  for (double L : {0.0, radiometric_max}) {
    if (variance(L) < 0) {
      std::ostringstream msg;
      msg << "noise model (alpha=" << alpha << ", beta=" << beta
          << ") predicts negative variance at L=" << L;
      throw ConfigError(msg.str());
    }
  }
}

double snr_from_db(double db) { return std::pow(10.0, db / 20.0); }

NoiseModel fit_noise_params(NoiseAnchor dark, NoiseAnchor bright, std::optional<double> radiometric_max) {
  if (dark.luminance == bright.luminance) {
    throw ConfigError("noise anchors must have distinct luminances");
  }
  if (!(dark.snr > 0) || !(bright.snr > 0)) throw ConfigError("anchor SNR must be positive");
  const double l1 = dark.luminance, l2 = bright.luminance;
  const double v1 = (l1 / dark.snr) * (l1 / dark.snr);
  const double v2 = (l2 / bright.snr) * (l2 / bright.snr);
  NoiseModel m;
  m.alpha = (v2 - v1) / (l2 - l1);
  m.beta = (v1 * l2 - v2 * l1) / (l2 - l1);
  // Cancellation leaves roundoff-sized floors (e.g. -3e-16 for a model that
  // is exactly proportional); those would fail the range check at L = 0.
  const double roundoff = 1e-12 * std::max(v1, v2);
  if (std::abs(m.beta) < roundoff) m.beta = 0;
  if (std::abs(m.alpha) * std::max(std::abs(l1), std::abs(l2)) < roundoff) m.alpha = 0;
  m.dark = dark;
  m.bright = bright;
  m.check_range(radiometric_max.value_or(std::max(l1, l2)));
  return m;
}

Raster apply_noise(const Raster& r, const NoiseModel& m, const Rng& rng) {
  const auto& k = simd::kernels();
  const float alpha = static_cast<float>(m.alpha);
  const float beta = static_cast<float>(m.beta);
  const std::size_t w = r.width();
  const std::uint64_t base = rng.position();
  Raster out(w, r.height(), r.gsd(), r.band_name());
  if (m.alpha == 0 && m.beta == 0) {
    out = r;
    for (float& v : out.values()) v = v > 0.0f ? v : 0.0f;
    return out;
  }
  parallel_for(
      r.height(),
      [&](std::size_t y0, std::size_t y1) {
        const float* in = r.values().data() + y0 * w;
        const std::size_t n = (y1 - y0) * w;
        const float lowest = k.min_affine(in, alpha, beta, n);
        if (lowest < 0) {
          std::ostringstream msg;
          msg << "band '" << r.band_name() << "': negative noise variance " << lowest
              << " (alpha=" << m.alpha << ", beta=" << m.beta << ")";
          throw DataError(msg.str());
        }
        std::vector<float> z(n);
        rng.normals_at(base, y0 * w, z);
        k.add_signal_noise(in, z.data(), alpha, beta, out.values().data() + y0 * w, n);
      },
      32);
  return out;
}

namespace {

MeanVar difference_noise(const Raster& r) {
  if (r.width() < 2) throw DataError("non-uniform patch needs width >= 2");
  std::vector<float> d;
  d.reserve((r.width() - 1) * r.height());
  for (std::size_t y = 0; y < r.height(); ++y) {
    const auto row = r.row(y);
    for (std::size_t x = 0; x + 1 < r.width(); ++x) d.push_back(row[x + 1] - row[x]);
  }
  MeanVar mv = mean_variance(d);
  mv.mean = mean_variance(r.values()).mean;
  mv.variance /= 2.0;
  return mv;
}

struct Line {
  double slope, intercept;
};

Line weighted_fit(const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& w) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
    sxx += w[i] * x[i] * x[i];
    sxy += w[i] * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (det == 0) throw DataError("noise estimation: singular fit");
  return {(sw * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det};
}

}  // namespace

NoiseEstimate estimate_noise(const std::vector<FlatPatch>& patches) {
  NoiseEstimate est;
  for (const auto& p : patches) {
    if (!p.raster) throw ConfigError("noise estimation: null patch");
    const MeanVar mv = p.known_uniform ? mean_variance(p.raster->values()) : difference_noise(*p.raster);
    est.means.push_back(mv.mean);
    est.variances.push_back(mv.variance);
  }
  if (est.means.size() < 2) throw DataError("noise estimation needs at least 2 patches");
  const auto [lo, hi] = std::minmax_element(est.means.begin(), est.means.end());
  if (!(*hi - *lo > 1e-9 * std::max(1.0, std::abs(*hi)))) {
    throw DataError("noise estimation needs patches of at least 2 distinct luminances");
  }

  std::vector<double> w(est.means.size(), 1.0);
  Line fit = weighted_fit(est.means, est.variances, w);
  const double floor = 1e-12 * std::max(1.0, *std::max_element(est.variances.begin(), est.variances.end()));
  for (int iter = 0; iter < 3; ++iter) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double pred = std::max(fit.slope * est.means[i] + fit.intercept, floor);
      w[i] = 1.0 / (pred * pred);
    }
    fit = weighted_fit(est.means, est.variances, w);
  }
  est.model.alpha = fit.slope;
  est.model.beta = fit.intercept;
  return est;
}

}  // namespace rawsat
