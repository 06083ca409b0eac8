#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "rawsat/simd/kernels.hpp"

// Functions carry target attributes instead of the whole file being built
// with -mavx2, so no AVX2 code leaks into inline functions shared with
// other translation units.
#define RAWSAT_AVX2 __attribute__((target("avx2")))

namespace rawsat::simd {
namespace {

RAWSAT_AVX2 void weighted_row_sum_avx2(float* out, const float* const* rows, const float* w,
                                       std::size_t taps, std::size_t n, bool accumulate) {
  std::size_t x = 0;
  for (; x + 8 <= n; x += 8) {
    __m256 acc = accumulate ? _mm256_loadu_ps(out + x) : _mm256_setzero_ps();
    for (std::size_t t = 0; t < taps; ++t) {
      acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(w[t]), _mm256_loadu_ps(rows[t] + x)));
    }
    _mm256_storeu_ps(out + x, acc);
  }
  for (; x < n; ++x) {
    float acc = accumulate ? out[x] : 0.0f;
    for (std::size_t t = 0; t < taps; ++t) {
      acc = acc + w[t] * rows[t][x];
    }
    out[x] = acc;
  }
}

RAWSAT_AVX2 std::size_t brovey_avx2(const float* pan, const float* const* ms, const float* w,
                                    std::size_t bands, float* const* out, std::size_t n, float eps) {
  std::size_t guarded = 0;
  std::size_t x = 0;
  const __m256 veps = _mm256_set1_ps(eps);
  const __m256 zero = _mm256_setzero_ps();
  for (; x + 8 <= n; x += 8) {
    __m256 s = zero;
    for (std::size_t j = 0; j < bands; ++j) {
      s = _mm256_add_ps(s, _mm256_mul_ps(_mm256_set1_ps(w[j]), _mm256_loadu_ps(ms[j] + x)));
    }
    const __m256 ok = _mm256_cmp_ps(s, veps, _CMP_GT_OQ);
    guarded += 8 - static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_ps(ok)));
    const __m256 p = _mm256_loadu_ps(pan + x);
    for (std::size_t i = 0; i < bands; ++i) {
      const __m256 f = _mm256_mul_ps(_mm256_div_ps(_mm256_loadu_ps(ms[i] + x), s), p);
      _mm256_storeu_ps(out[i] + x, _mm256_blendv_ps(zero, f, ok));
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

RAWSAT_AVX2 void add_signal_noise_avx2(const float* in, const float* z, float alpha, float beta,
                                       float* out, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  const __m256 vb = _mm256_set1_ps(beta);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t x = 0;
  for (; x + 8 <= n; x += 8) {
    const __m256 v = _mm256_loadu_ps(in + x);
    const __m256 sd = _mm256_sqrt_ps(_mm256_add_ps(_mm256_mul_ps(va, v), vb));
    const __m256 r = _mm256_add_ps(v, _mm256_mul_ps(sd, _mm256_loadu_ps(z + x)));
    _mm256_storeu_ps(out + x, _mm256_max_ps(r, zero));
  }
  for (; x < n; ++x) {
    const float sd = std::sqrt(alpha * in[x] + beta);
    const float v = in[x] + sd * z[x];
    out[x] = v > 0.0f ? v : 0.0f;
  }
}

RAWSAT_AVX2 void quantize_avx2(const float* in, double max_code, double full_scale, float* out,
                               std::size_t n) {
  const __m256d vmax = _mm256_set1_pd(max_code);
  const __m256d vscale = _mm256_set1_pd(full_scale);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t x = 0;
  for (; x + 4 <= n; x += 4) {
    const __m256d v = _mm256_cvtps_pd(_mm_loadu_ps(in + x));
    __m256d c = _mm256_round_pd(_mm256_div_pd(_mm256_mul_pd(v, vmax), vscale),
                                _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    c = _mm256_min_pd(_mm256_max_pd(c, zero), vmax);
    _mm_storeu_ps(out + x, _mm256_cvtpd_ps(_mm256_div_pd(_mm256_mul_pd(c, vscale), vmax)));
  }
  for (; x < n; ++x) {
    double c = std::nearbyint(static_cast<double>(in[x]) * max_code / full_scale);
    c = c > 0.0 ? c : 0.0;
    c = c < max_code ? c : max_code;
    out[x] = static_cast<float>(c * full_scale / max_code);
  }
}

RAWSAT_AVX2 void relu_avx2(float* x, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(x + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  }
  for (; i < n; ++i) {
    x[i] = x[i] > 0.0f ? x[i] : 0.0f;
  }
}

RAWSAT_AVX2 void add_scaled_avx2(const float* base, const float* v, float scale, float* out,
                                 std::size_t n) {
  const __m256 vs = _mm256_set1_ps(scale);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(base + i),
                                            _mm256_mul_ps(vs, _mm256_loadu_ps(v + i))));
  }
  for (; i < n; ++i) {
    out[i] = base[i] + scale * v[i];
  }
}

RAWSAT_AVX2 float min_affine_avx2(const float* in, float alpha, float beta, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  const __m256 vb = _mm256_set1_ps(beta);
  __m256 m = _mm256_set1_ps(std::numeric_limits<float>::infinity());
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    m = _mm256_min_ps(m, _mm256_add_ps(_mm256_mul_ps(va, _mm256_loadu_ps(in + i)), vb));
  }
  alignas(32) float lanes[8];
  _mm256_store_ps(lanes, m);
  float r = std::numeric_limits<float>::infinity();
  for (float l : lanes) {
    r = l < r ? l : r;
  }
  for (; i < n; ++i) {
    const float v = alpha * in[i] + beta;
    r = v < r ? v : r;
  }
  return r;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{
      weighted_row_sum_avx2, brovey_avx2,     add_signal_noise_avx2, quantize_avx2,
      relu_avx2,             add_scaled_avx2, min_affine_avx2,
  };
  return table;
}

}  // namespace rawsat::simd

#endif
