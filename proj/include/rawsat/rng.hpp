#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace rawsat {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a over the bytes of a label; used to derive stream ids from band
/// names and granule ids.
constexpr std::uint64_t hash_label(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t combine_stream(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b + kGoldenGamma));
}

// Counter-based SplitMix64: output n is mix64(base + (n + 1) * gamma), with
// base = mix64(seed ^ mix64(stream_id + gamma)). Any position of the stream
// can be computed directly, so chunked parallel consumers see the same
// values as a sequential one.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_(stream_id), base_(mix64(seed ^ mix64(stream_id + kGoldenGamma))) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }
  std::uint64_t position() const { return counter_; }

  std::uint64_t at(std::uint64_t n) const { return mix64(base_ + (n + 1) * kGoldenGamma); }
  std::uint64_t next_u64() { return at(counter_++); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  void skip(std::uint64_t n) { counter_ += n; }

  // Standard normals via Box-Muller. Normal i uses pair k = i / 2, which
  // consumes raw outputs raw_base + 2k (radius, mapped to (0,1]) and
  // raw_base + 2k + 1 (angle, [0,1)); even i takes the cosine branch, odd i
  // the sine branch. out[j] receives normal first_normal + j. The member
  // counter is neither read nor advanced.
  void normals_at(std::uint64_t raw_base, std::uint64_t first_normal, std::span<float> out) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

/// n standard normals starting at the current position; the generator
/// advances by 2 * ceil(n / 2) raw outputs.
std::vector<float> rng_normal(Rng& rng, std::size_t n);

}  // namespace rawsat
