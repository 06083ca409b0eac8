#include <cmath>
#include <limits>

#include "rawsat/simd/kernels.hpp"

namespace rawsat::simd {
namespace {

void weighted_row_sum_scalar(float* out, const float* const* rows, const float* w, std::size_t taps,
                             std::size_t n, bool accumulate) {
  for (std::size_t x = 0; x < n; ++x) {
    float acc = accumulate ? out[x] : 0.0f;
    for (std::size_t t = 0; t < taps; ++t) {
      acc = acc + w[t] * rows[t][x];
    }
    out[x] = acc;
  }
}

std::size_t brovey_scalar(const float* pan, const float* const* ms, const float* w, std::size_t bands,
                          float* const* out, std::size_t n, float eps) {
  std::size_t guarded = 0;
  for (std::size_t x = 0; x < n; ++x) {
    float s = 0.0f;
    for (std::size_t j = 0; j < bands; ++j) {
      s = s + w[j] * ms[j][x];
    }
    if (s > eps) {
      for (std::size_t i = 0; i < bands; ++i) {
        out[i][x] = ms[i][x] / s * pan[x];
      }
    } else {
      ++guarded;
      for (std::size_t i = 0; i < bands; ++i) {
        out[i][x] = 0.0f;
      }
    }
  }
  return guarded;
}

void add_signal_noise_scalar(const float* in, const float* z, float alpha, float beta, float* out,
                             std::size_t n) {
  for (std::size_t x = 0; x < n; ++x) {
    const float sd = std::sqrt(alpha * in[x] + beta);
    const float v = in[x] + sd * z[x];
    out[x] = v > 0.0f ? v : 0.0f;
  }
}

void quantize_scalar(const float* in, double max_code, double full_scale, float* out, std::size_t n) {
  for (std::size_t x = 0; x < n; ++x) {
    double c = std::nearbyint(static_cast<double>(in[x]) * max_code / full_scale);
    c = c > 0.0 ? c : 0.0;
    c = c < max_code ? c : max_code;
    out[x] = static_cast<float>(c * full_scale / max_code);
  }
}

void relu_scalar(float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = x[i] > 0.0f ? x[i] : 0.0f;
  }
}

void add_scaled_scalar(const float* base, const float* v, float scale, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = base[i] + scale * v[i];
  }
}

float min_affine_scalar(const float* in, float alpha, float beta, std::size_t n) {
  float m = std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const float v = alpha * in[i] + beta;
    m = v < m ? v : m;
  }
  return m;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      weighted_row_sum_scalar, brovey_scalar,   add_signal_noise_scalar, quantize_scalar,
      relu_scalar,             add_scaled_scalar, min_affine_scalar,
  };
  return table;
}

}  // namespace rawsat::simd
