#pragma once

#include <cstddef>
#include <span>

namespace rawsat {

// Pairwise (cascade) summation in double. The split points depend only on
// the length, so results are reproducible regardless of threading.
double pairwise_sum(std::span<const float> v);
double pairwise_sum(std::span<const double> v);

struct MeanVar {
  double mean = 0;
  double variance = 0;  // unbiased (n - 1)
  std::size_t count = 0;
};

/// Two-pass mean/variance; both passes use pairwise summation.
MeanVar mean_variance(std::span<const float> v);

/// Linear-interpolated percentile, p in [0, 100].
double percentile(std::span<const float> v, double p);

double psnr(std::span<const float> reference, std::span<const float> test, double peak);

}  // namespace rawsat
