#pragma once

// Data-parallel inner loops shared by the image stages. Each kernel has a
// scalar reference implementation and vector variants (AVX2 on x86-64, NEON
// on AArch64) selected once at runtime. Variants perform the same float
// operations in the same order, so their outputs are bit-identical to the
// scalar reference; the equivalence tests assert exactly that.

#include <cstddef>
#include <string_view>

namespace rawsat::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

/// Best ISA supported by this CPU and build.
Isa detect_isa();

// ISA used by the dispatched kernels. Defaults to detect_isa() unless the
// RAWSAT_SIMD environment variable names a supported ISA ("scalar",
// "avx2", "neon").
Isa active_isa();
void set_active_isa(Isa isa);  // throws ConfigError if unsupported here
bool isa_supported(Isa isa);

struct KernelTable {
  // out[x] (+)= sum_t w[t] * rows[t][x], taps summed in order t = 0..taps-1,
  // starting from out[x] when accumulate is set and from 0 otherwise.
  void (*weighted_row_sum)(float* out, const float* const* rows, const float* w, std::size_t taps,
                           std::size_t n, bool accumulate);

  // Brovey fusion of one pixel run. s = sum_j w[j] * ms[j][x] (in order j);
  // out[i][x] = s > eps ? ms[i][x] / s * pan[x] : 0. Returns the number of
  // guarded pixels (s <= eps).
  std::size_t (*brovey)(const float* pan, const float* const* ms, const float* w, std::size_t bands,
                        float* const* out, std::size_t n, float eps);

  // out[x] = max(0, in[x] + sqrt(alpha * in[x] + beta) * z[x]).
  void (*add_signal_noise)(const float* in, const float* z, float alpha, float beta, float* out,
                           std::size_t n);

  // Evaluated in double: q = clamp(nearbyint(in[x] * max_code / full_scale),
  // 0, max_code) with round half to even; out[x] = float(q * full_scale /
  // max_code). Exact at both endpoints and idempotent for max_code < 2^24.
  void (*quantize)(const float* in, double max_code, double full_scale, float* out, std::size_t n);

  // x[i] = max(x[i], 0).
  void (*relu)(float* x, std::size_t n);

  // out[i] = base[i] + scale * v[i].
  void (*add_scaled)(const float* base, const float* v, float scale, float* out, std::size_t n);

  // Smallest alpha * in[x] + beta over the run (used to reject invalid
  // noise models before sampling).
  float (*min_affine)(const float* in, float alpha, float beta, std::size_t n);
};

const KernelTable& kernels_for(Isa isa);
inline const KernelTable& kernels() { return kernels_for(active_isa()); }

// Per-ISA tables, defined in their own translation units.
const KernelTable& scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_kernels();
#endif
#if defined(__aarch64__)
const KernelTable& neon_kernels();
#endif

}  // namespace rawsat::simd
