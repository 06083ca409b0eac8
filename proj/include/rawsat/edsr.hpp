#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rawsat/raster.hpp"

namespace rawsat {

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
  std::size_t numel() const;
  bool operator==(const Tensor&) const = default;
};

// Single-channel EDSR-style network at upscale factor 1:
//   h = head(x); b = h; for each block: b = b + s * conv2(relu(conv1(b)));
//   y = tail(b + h)
// with x = input / radiometric_max and output = y * radiometric_max. All
// convolutions are 3x3 with whole-sample reflect padding.
struct EdsrWeights {
  std::uint32_t n_blocks = 4;
  std::uint32_t channels = 32;
  float residual_scale = 0.1f;
  float radiometric_max = 1.0f;
  // head.w, head.b, then per block conv1.w, conv1.b, conv2.w, conv2.b,
  // then tail.w, tail.b. Weights are [out, in, 3, 3], biases [out].
  std::vector<Tensor> tensors;

  /// Zero-filled tensors of the right shapes.
  static EdsrWeights zeros(std::uint32_t n_blocks, std::uint32_t channels, float residual_scale = 0.1f,
                           float radiometric_max = 1.0f);
  std::vector<std::vector<std::uint32_t>> expected_shapes() const;
  std::vector<std::string> tensor_names() const;
  /// Throws FormatError on any shape inconsistency.
  void validate() const;
  Tensor& head_w() { return tensors[0]; }
  Tensor& head_b() { return tensors[1]; }
  Tensor& block(std::size_t i, std::size_t k) { return tensors[2 + 4 * i + k]; }
  Tensor& tail_w() { return tensors[tensors.size() - 2]; }
  Tensor& tail_b() { return tensors.back(); }
  bool operator==(const EdsrWeights&) const = default;
};

// EDSW1 container: "EDSW", u32 version (1), u32 n_blocks, u32 channels,
// f32 residual_scale, f32 radiometric_max, then each tensor as u32 rank,
// u32 dims[rank], f32 data; finally the CRC-32 of all preceding bytes. All
// little-endian.
EdsrWeights load_weights(const std::filesystem::path& path);
void save_weights(const EdsrWeights& w, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_weights(const EdsrWeights& w);
EdsrWeights decode_weights(const std::vector<std::uint8_t>& bytes);

Raster edsr_infer(const Raster& r, const EdsrWeights& w);

}  // namespace rawsat
