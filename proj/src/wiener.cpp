#include "rawsat/wiener.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "rawsat/error.hpp"
#include "rawsat/parallel.hpp"
#include "rawsat/stats.hpp"

namespace rawsat {
namespace {

// The FFTW planner is not thread-safe; execution on fresh arrays is.
std::mutex g_plan_mutex;

struct Plan {
  fftw_plan p = nullptr;
  ~Plan() {
    if (p) {
      std::lock_guard lock(g_plan_mutex);
      fftw_destroy_plan(p);
    }
  }
};

struct Buffer {
  double* data;
  explicit Buffer(std::size_t n) : data(fftw_alloc_real(n)) {
    if (!data) throw std::bad_alloc();
  }
  ~Buffer() { fftw_free(data); }
};

// Response of the taps at the DCT-II frequencies k / (2n).
std::vector<double> response_table(const std::vector<double>& taps, std::size_t n) {
  std::vector<double> h(n);
  for (std::size_t k = 0; k < n; ++k) h[k] = kernel_response(taps, static_cast<double>(k) / (2.0 * n));
  return h;
}

}  // namespace

void WienerConfig::validate() const {
  mtf.validate();
  if (!(nsr >= 0) || !std::isfinite(nsr)) throw ConfigError("wiener nsr must be finite and >= 0");
}

Raster wiener_restore(const Raster& r, const WienerConfig& cfg) {
  cfg.validate();
  if (cfg.mtf.mtf_at_nyquist == 1.0 && cfg.nsr == 0) return r;
  const std::size_t w = r.width(), h = r.height(), n = w * h;
  const auto taps = mtf_kernel(cfg.mtf);
  // apply_mtf convolves with float taps; invert that exact operator.
  std::vector<double> ftaps(taps.size());
  std::transform(taps.begin(), taps.end(), ftaps.begin(),
                 [](double t) { return static_cast<double>(static_cast<float>(t)); });
  const auto hx = response_table(ftaps, w);
  const auto hy = response_table(ftaps, h);

  Buffer buf(n);
  std::copy(r.values().begin(), r.values().end(), buf.data);
  Plan fwd, inv;
  {
    std::lock_guard lock(g_plan_mutex);
    const int hh = static_cast<int>(h), ww = static_cast<int>(w);
    fwd.p = fftw_plan_r2r_2d(hh, ww, buf.data, buf.data, FFTW_REDFT10, FFTW_REDFT10, FFTW_ESTIMATE);
    inv.p = fftw_plan_r2r_2d(hh, ww, buf.data, buf.data, FFTW_REDFT01, FFTW_REDFT01, FFTW_ESTIMATE);
  }
  if (!fwd.p || !inv.p) throw Error("fftw plan creation failed");
  fftw_execute(fwd.p);
  // REDFT10 followed by REDFT01 scales by (2h)(2w).
  const double norm = 1.0 / (4.0 * static_cast<double>(n));
  parallel_for(h, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double H = hx[x] * hy[y];
        const double denom = H * H + cfg.nsr;
        buf.data[y * w + x] *= denom > 0 ? norm * H / denom : 0.0;
      }
    }
  });
  fftw_execute(inv.p);
  Raster out(w, h, r.gsd(), r.band_name());
  for (std::size_t i = 0; i < n; ++i) out.values()[i] = static_cast<float>(buf.data[i]);
  return out;
}

double estimate_nsr(const Raster& r, const NoiseModel& noise) {
  const MeanVar mv = mean_variance(r.values());
  std::vector<double> var(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) var[i] = std::max(0.0, noise.variance(r.values()[i]));
  const double noise_mean = pairwise_sum(var) / static_cast<double>(var.size());
  const double signal = mv.variance - noise_mean;
  if (!(signal > 0)) {
    throw DataError("cannot estimate nsr: image variance does not exceed the noise variance");
  }
  return noise_mean / signal;
}

}  // namespace rawsat
