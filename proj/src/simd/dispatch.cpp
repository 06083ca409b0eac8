#include <atomic>
#include <cstdlib>
#include <string>

#include "rawsat/error.hpp"
#include "rawsat/simd/kernels.hpp"

namespace rawsat::simd {
namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("RAWSAT_SIMD")) {
    const std::string v = env;
    if (v == "scalar") return Isa::Scalar;
    if (v == "avx2" && isa_supported(Isa::Avx2)) return Isa::Avx2;
    if (v == "neon" && isa_supported(Isa::Neon)) return Isa::Neon;
  }
  return detect_isa();
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detect_isa() {
  if (isa_supported(Isa::Avx2)) return Isa::Avx2;
  if (isa_supported(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw ConfigError("SIMD ISA '" + std::string(isa_name(isa)) + "' is not supported on this CPU");
  }
  active().store(isa, std::memory_order_relaxed);
}

const KernelTable& kernels_for(Isa isa) {
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::Avx2: return avx2_kernels();
#endif
#if defined(__aarch64__)
    case Isa::Neon: return neon_kernels();
#endif
    default: return scalar_kernels();
  }
}

}  // namespace rawsat::simd
