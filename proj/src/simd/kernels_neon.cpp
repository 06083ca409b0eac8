#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <limits>

#include "rawsat/simd/kernels.hpp"

// AArch64 always has Advanced SIMD; no runtime probe is needed. vmulq/vaddq
// are used instead of vfmaq so results match the scalar reference.

namespace rawsat::simd {
namespace {

void weighted_row_sum_neon(float* out, const float* const* rows, const float* w, std::size_t taps,
                           std::size_t n, bool accumulate) {
  std::size_t x = 0;
  for (; x + 4 <= n; x += 4) {
    float32x4_t acc = accumulate ? vld1q_f32(out + x) : vdupq_n_f32(0.0f);
    for (std::size_t t = 0; t < taps; ++t) {
      acc = vaddq_f32(acc, vmulq_f32(vdupq_n_f32(w[t]), vld1q_f32(rows[t] + x)));
    }
    vst1q_f32(out + x, acc);
  }
  for (; x < n; ++x) {
    float acc = accumulate ? out[x] : 0.0f;
    for (std::size_t t = 0; t < taps; ++t) {
      acc = acc + w[t] * rows[t][x];
    }
    out[x] = acc;
  }
}

std::size_t brovey_neon(const float* pan, const float* const* ms, const float* w, std::size_t bands,
                        float* const* out, std::size_t n, float eps) {
  std::size_t guarded = 0;
  std::size_t x = 0;
  const float32x4_t veps = vdupq_n_f32(eps);
  const float32x4_t zero = vdupq_n_f32(0.0f);
  for (; x + 4 <= n; x += 4) {
    float32x4_t s = zero;
    for (std::size_t j = 0; j < bands; ++j) {
      s = vaddq_f32(s, vmulq_f32(vdupq_n_f32(w[j]), vld1q_f32(ms[j] + x)));
    }
    const uint32x4_t ok = vcgtq_f32(s, veps);
    guarded += 4 - vaddvq_u32(vshrq_n_u32(ok, 31));
    const float32x4_t p = vld1q_f32(pan + x);
    for (std::size_t i = 0; i < bands; ++i) {
      const float32x4_t f = vmulq_f32(vdivq_f32(vld1q_f32(ms[i] + x), s), p);
      vst1q_f32(out[i] + x, vbslq_f32(ok, f, zero));
    }
  }
  for (; x < n; ++x) {
    float s = 0.0f;
    for (std::size_t j = 0; j < bands; ++j) {
      s = s + w[j] * ms[j][x];
    }
    const bool ok = s > eps;
    guarded += ok ? 0 : 1;
    for (std::size_t i = 0; i < bands; ++i) {
      out[i][x] = ok ? ms[i][x] / s * pan[x] : 0.0f;
    }
  }
  return guarded;
}

void add_signal_noise_neon(const float* in, const float* z, float alpha, float beta, float* out,
                           std::size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  const float32x4_t vb = vdupq_n_f32(beta);
  const float32x4_t zero = vdupq_n_f32(0.0f);
  std::size_t x = 0;
  for (; x + 4 <= n; x += 4) {
    const float32x4_t v = vld1q_f32(in + x);
    const float32x4_t sd = vsqrtq_f32(vaddq_f32(vmulq_f32(va, v), vb));
    const float32x4_t r = vaddq_f32(v, vmulq_f32(sd, vld1q_f32(z + x)));
    vst1q_f32(out + x, vbslq_f32(vcgtq_f32(r, zero), r, zero));
  }
  for (; x < n; ++x) {
    const float sd = std::sqrt(alpha * in[x] + beta);
    const float v = in[x] + sd * z[x];
    out[x] = v > 0.0f ? v : 0.0f;
  }
}

void quantize_neon(const float* in, double max_code, double full_scale, float* out, std::size_t n) {
  const float64x2_t vmax = vdupq_n_f64(max_code);
  const float64x2_t vscale = vdupq_n_f64(full_scale);
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t x = 0;
  for (; x + 2 <= n; x += 2) {
    const float64x2_t v = vcvt_f64_f32(vld1_f32(in + x));
    float64x2_t c = vrndnq_f64(vdivq_f64(vmulq_f64(v, vmax), vscale));
    c = vbslq_f64(vcgtq_f64(c, zero), c, zero);
    c = vbslq_f64(vcltq_f64(c, vmax), c, vmax);
    vst1_f32(out + x, vcvt_f32_f64(vdivq_f64(vmulq_f64(c, vscale), vmax)));
  }
  for (; x < n; ++x) {
    double c = std::nearbyint(static_cast<double>(in[x]) * max_code / full_scale);
    c = c > 0.0 ? c : 0.0;
    c = c < max_code ? c : max_code;
    out[x] = static_cast<float>(c * full_scale / max_code);
  }
}

void relu_neon(float* x, std::size_t n) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vld1q_f32(x + i);
    vst1q_f32(x + i, vbslq_f32(vcgtq_f32(v, zero), v, zero));
  }
  for (; i < n; ++i) {
    x[i] = x[i] > 0.0f ? x[i] : 0.0f;
  }
}

void add_scaled_neon(const float* base, const float* v, float scale, float* out, std::size_t n) {
  const float32x4_t vs = vdupq_n_f32(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f32(out + i, vaddq_f32(vld1q_f32(base + i), vmulq_f32(vs, vld1q_f32(v + i))));
  }
  for (; i < n; ++i) {
    out[i] = base[i] + scale * v[i];
  }
}

float min_affine_neon(const float* in, float alpha, float beta, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  const float32x4_t vb = vdupq_n_f32(beta);
  float32x4_t m = vdupq_n_f32(std::numeric_limits<float>::infinity());
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    m = vminq_f32(m, vaddq_f32(vmulq_f32(va, vld1q_f32(in + i)), vb));
  }
  float r = vminvq_f32(m);
  for (; i < n; ++i) {
    const float v = alpha * in[i] + beta;
    r = v < r ? v : r;
  }
  return r;
}

}  // namespace

const KernelTable& neon_kernels() {
  static const KernelTable table{
      weighted_row_sum_neon, brovey_neon,     add_signal_noise_neon, quantize_neon,
      relu_neon,             add_scaled_neon, min_affine_neon,
  };
  return table;
}

}  // namespace rawsat::simd

#endif
