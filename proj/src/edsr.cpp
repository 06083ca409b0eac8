#include "rawsat/edsr.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rawsat/error.hpp"
#include "rawsat/parallel.hpp"
#include "rawsat/resample.hpp"
#include "rawsat/simd/kernels.hpp"

namespace rawsat {

static_assert(std::endian::native == std::endian::little, "EDSW1 I/O assumes a little-endian host");

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::vector<std::uint32_t>> EdsrWeights::expected_shapes() const {
  const std::uint32_t c = channels;
  std::vector<std::vector<std::uint32_t>> s{{c, 1, 3, 3}, {c}};
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    s.push_back({c, c, 3, 3});
    s.push_back({c});
    s.push_back({c, c, 3, 3});
    s.push_back({c});
  }
  s.push_back({1, c, 3, 3});
  s.push_back({1});
  return s;
}

std::vector<std::string> EdsrWeights::tensor_names() const {
  std::vector<std::string> n{"head.w", "head.b"};
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    for (const char* t : {"conv1.w", "conv1.b", "conv2.w", "conv2.b"}) n.push_back(p + t);
  }
  n.push_back("tail.w");
  n.push_back("tail.b");
  return n;
}

EdsrWeights EdsrWeights::zeros(std::uint32_t n_blocks, std::uint32_t channels, float residual_scale,
                               float radiometric_max) {
  EdsrWeights w;
  w.n_blocks = n_blocks;
  w.channels = channels;
  w.residual_scale = residual_scale;
  w.radiometric_max = radiometric_max;
  for (auto& dims : w.expected_shapes()) {
    Tensor t{dims, {}};
    t.data.assign(t.numel(), 0.0f);
    w.tensors.push_back(std::move(t));
  }
  return w;
}

void EdsrWeights::validate() const {
  if (n_blocks < 1 || channels < 1) throw FormatError("weight file: n_blocks and channels must be >= 1");
  if (!(radiometric_max > 0)) throw FormatError("weight file: radiometric_max must be positive");
  const auto shapes = expected_shapes();
  const auto names = tensor_names();
  if (tensors.size() != shapes.size()) {
    throw FormatError("weight file: expected " + std::to_string(shapes.size()) + " tensors, found " +
                      std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (tensors[i].dims != shapes[i] || tensors[i].data.size() != tensors[i].numel()) {
      throw FormatError("weight file: tensor shape mismatch for " + names[i]);
    }
  }
}

namespace {

constexpr char kMagic[4] = {'E', 'D', 'S', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  std::uint8_t raw[4];
  std::memcpy(raw, &v, 4);
  b.insert(b.end(), raw, raw + 4);
}

void put_f32(std::vector<std::uint8_t>& b, float v) { put_u32(b, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw FormatError("weight file: unexpected end of file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, p_ + pos_, 4);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void floats(float* out, std::size_t count) {
    need(count * 4);
    std::memcpy(out, p_ + pos_, count * 4);
    pos_ += count * 4;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(const std::uint8_t* p, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

}  // namespace

std::vector<std::uint8_t> encode_weights(const EdsrWeights& w) {
  w.validate();
  std::vector<std::uint8_t> b(kMagic, kMagic + 4);
  put_u32(b, kVersion);
  put_u32(b, w.n_blocks);
  put_u32(b, w.channels);
  put_f32(b, w.residual_scale);
  put_f32(b, w.radiometric_max);
  for (const auto& t : w.tensors) {
    put_u32(b, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u32(b, d);
    for (float v : t.data) put_f32(b, v);
  }
  put_u32(b, crc32_of(b.data(), b.size()));
  return b;
}

EdsrWeights decode_weights(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw FormatError("weight file: unexpected end of file");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("weight file: bad magic (expected EDSW)");
  Reader body(bytes.data() + 4, bytes.size() - 4);
  const std::uint32_t version = body.u32();
  if (version != kVersion) throw FormatError("weight file: unsupported version " + std::to_string(version));
  EdsrWeights w;
  w.n_blocks = body.u32();
  w.channels = body.u32();
  w.residual_scale = body.f32();
  w.radiometric_max = body.f32();
  if (w.n_blocks < 1 || w.channels < 1 || w.n_blocks > 4096 || w.channels > 4096) {
    throw FormatError("weight file: implausible architecture " + std::to_string(w.n_blocks) + " blocks x " +
                      std::to_string(w.channels) + " channels");
  }
  const auto shapes = w.expected_shapes();
  const auto names = w.tensor_names();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Tensor t;
    const std::uint32_t rank = body.u32();
    if (rank != shapes[i].size()) throw FormatError("weight file: tensor shape mismatch for " + names[i]);
    for (std::uint32_t k = 0; k < rank; ++k) t.dims.push_back(body.u32());
    if (t.dims != shapes[i]) throw FormatError("weight file: tensor shape mismatch for " + names[i]);
    t.data.resize(t.numel());
    body.floats(t.data.data(), t.data.size());
    w.tensors.push_back(std::move(t));
  }
  const std::size_t payload = 4 + body.pos();
  const std::uint32_t stored = body.u32();
  if (4 + body.pos() != bytes.size()) throw FormatError("weight file: trailing bytes after checksum");
  if (crc32_of(bytes.data(), payload) != stored) throw FormatError("weight file: checksum mismatch");
  w.validate();
  return w;
}

EdsrWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open weight file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  try {
    return decode_weights(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_weights(const EdsrWeights& w, const std::filesystem::path& path) {
  const auto bytes = encode_weights(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed to write weight file " + path.string());
}

namespace {

// Feature maps stored with a one-pixel reflect border so every 3x3 tap is a
// plain row offset.
struct Feature {
  std::size_t w = 0, h = 0, c = 0;
  std::vector<float> data;  // c x (h + 2) x (w + 2)
  Feature(std::size_t w_, std::size_t h_, std::size_t c_) : w(w_), h(h_), c(c_), data(c_ * (h_ + 2) * (w_ + 2)) {}
  std::size_t stride() const { return w + 2; }
  float* row(std::size_t ch, std::size_t y) { return data.data() + (ch * (h + 2) + y + 1) * stride() + 1; }
  const float* row(std::size_t ch, std::ptrdiff_t y) const {
    return data.data() + (ch * (h + 2) + static_cast<std::size_t>(y + 1)) * stride() + 1;
  }
  void fill_border() {
    const auto W = static_cast<std::ptrdiff_t>(w), H = static_cast<std::ptrdiff_t>(h);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < h; ++y) {
        float* r = row(ch, y);
        r[-1] = r[reflect_index(-1, W)];
        r[w] = r[reflect_index(W, W)];
      }
      const std::size_t rowlen = w + 2;
      std::memcpy(row(ch, 0) - 1 - stride(), row(ch, static_cast<std::size_t>(reflect_index(-1, H))) - 1,
                  rowlen * sizeof(float));
      std::memcpy(row(ch, h - 1) - 1 + stride(), row(ch, static_cast<std::size_t>(reflect_index(H, H))) - 1,
                  rowlen * sizeof(float));
    }
  }
};

// out[o] = bias[o] + sum_{i, ky, kx} w[o, i, ky, kx] * in[i](y + ky - 1, x + kx - 1)
void conv3x3(const Feature& in, const Tensor& wt, const Tensor& bias, Feature& out) {
  const auto& k = simd::kernels();
  const std::size_t cin = in.c, cout = out.c, w = in.w;
  parallel_for(
      in.h,
      [&](std::size_t y0, std::size_t y1) {
        std::vector<const float*> rows(cin * 9);
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t i = 0; i < cin; ++i)
            for (std::size_t ky = 0; ky < 3; ++ky)
              for (std::size_t kx = 0; kx < 3; ++kx)
                rows[i * 9 + ky * 3 + kx] =
                    in.row(i, static_cast<std::ptrdiff_t>(y + ky) - 1) + static_cast<std::ptrdiff_t>(kx) - 1;
          for (std::size_t o = 0; o < cout; ++o) {
            float* dst = out.row(o, y);
            std::fill(dst, dst + w, bias.data[o]);
            k.weighted_row_sum(dst, rows.data(), wt.data.data() + o * cin * 9, cin * 9, w, true);
          }
        }
      },
      4);
  out.fill_border();
}

}  // namespace

Raster edsr_infer(const Raster& r, const EdsrWeights& wts) {
  wts.validate();
  const auto& k = simd::kernels();
  const std::size_t w = r.width(), h = r.height(), c = wts.channels;
  if (w < 2 || h < 2) throw SchemaError("edsr_infer needs at least 2x2 pixels for reflect padding");
  const auto& t = wts.tensors;

  Feature x(w, h, 1);
  const float inv = 1.0f / wts.radiometric_max;
  for (std::size_t y = 0; y < h; ++y) {
    const auto src = r.row(y);
    float* dst = x.row(0, y);
    for (std::size_t i = 0; i < w; ++i) dst[i] = src[i] * inv;
  }
  x.fill_border();

  Feature head(w, h, c), body(w, h, c), tmp(w, h, c), res(w, h, c);
  conv3x3(x, t[0], t[1], head);
  body.data = head.data;
  for (std::size_t b = 0; b < wts.n_blocks; ++b) {
    conv3x3(body, t[2 + 4 * b], t[3 + 4 * b], tmp);
    k.relu(tmp.data.data(), tmp.data.size());  // borders are reflections, relu commutes
    conv3x3(tmp, t[4 + 4 * b], t[5 + 4 * b], res);
    k.add_scaled(body.data.data(), res.data.data(), wts.residual_scale, body.data.data(), body.data.size());
  }
  k.add_scaled(body.data.data(), head.data.data(), 1.0f, body.data.data(), body.data.size());

  Feature y(w, h, 1);
  conv3x3(body, t[t.size() - 2], t.back(), y);
  Raster out(w, h, r.gsd(), r.band_name());
  for (std::size_t yy = 0; yy < h; ++yy) {
    const float* src = y.row(0, yy);
    auto dst = out.row(yy);
    for (std::size_t i = 0; i < w; ++i) dst[i] = src[i] * wts.radiometric_max;
  }
  return out;
}

}  // namespace rawsat
