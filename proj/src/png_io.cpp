#include "rawsat/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <memory>

#include "rawsat/error.hpp"

namespace rawsat {
namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors through longjmp; everything between setjmp and the
// calls that may jump is kept trivially destructible.
bool write_rows(std::FILE* fp, png_uint_32 w, png_uint_32 h, int depth, int color_type,
                png_bytep* rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, w, h, depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct PngHeader {
  png_uint_32 width = 0, height = 0;
  int depth = 0, channels = 0;
};

bool read_rows(std::FILE* fp, PngHeader* hdr, std::vector<unsigned char>* pixels) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  png_bytep* rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    std::free(rows);
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  hdr->width = png_get_image_width(png, info);
  hdr->height = png_get_image_height(png, info);
  hdr->depth = png_get_bit_depth(png, info);
  hdr->channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels->resize(stride * hdr->height);
  rows = static_cast<png_bytep*>(std::malloc(sizeof(png_bytep) * hdr->height));
  for (png_uint_32 y = 0; y < hdr->height; ++y) rows[y] = pixels->data() + y * stride;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  std::free(rows);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace

void write_png(const fs::path& path, const std::vector<const Raster*>& bands, int bit_depth,
               LinearScale scale) {
  if (bands.size() != 1 && bands.size() != 3) {
    throw ConfigError("PNG export needs 1 (gray) or 3 (RGB) bands, got " + std::to_string(bands.size()));
  }
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("PNG bit depth must be 8 or 16");
  if (!(scale.hi > scale.lo)) throw ConfigError("PNG scale requires hi > lo");
  const Raster& first = *bands.front();
  for (const Raster* b : bands) {
    if (!b->same_shape(first)) throw SchemaError("PNG bands differ in size");
  }
  const std::size_t w = first.width(), h = first.height(), c = bands.size();
  const std::size_t bytes_per = bit_depth / 8;
  const double max_code = bit_depth == 8 ? 255.0 : 65535.0;
  const double k = max_code / (scale.hi - scale.lo);
  std::vector<unsigned char> data(w * h * c * bytes_per);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = (static_cast<double>(bands[ch]->at(x, y)) - scale.lo) * k;
        const auto code = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, max_code)));
        unsigned char* p = data.data() + ((y * w + x) * c + ch) * bytes_per;
        if (bytes_per == 1) {
          p[0] = static_cast<unsigned char>(code);
        } else {
          p[0] = static_cast<unsigned char>(code >> 8);  // PNG samples are big-endian
          p[1] = static_cast<unsigned char>(code & 0xFF);
        }
      }
    }
  }
  std::vector<png_bytep> rows(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = data.data() + y * w * c * bytes_per;
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw Error("cannot open '" + path.string() + "' for writing");
  if (!write_rows(fp.get(), static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
                  c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, rows.data())) {
    throw Error("libpng failed writing '" + path.string() + "'");
  }
}

std::vector<Raster> read_png(const fs::path& path, LinearScale scale, double gsd) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw FormatError("cannot open PNG '" + path.string() + "'");
  PngHeader hdr;
  std::vector<unsigned char> pixels;
  if (!read_rows(fp.get(), &hdr, &pixels)) throw FormatError("'" + path.string() + "' is not a readable PNG");
  if (hdr.channels != 1 && hdr.channels != 3) {
    throw FormatError("'" + path.string() + "': unsupported channel count " + std::to_string(hdr.channels));
  }
  const std::size_t w = hdr.width, h = hdr.height, c = static_cast<std::size_t>(hdr.channels);
  const std::size_t bytes_per = hdr.depth == 16 ? 2 : 1;
  const double max_code = hdr.depth == 16 ? 65535.0 : 255.0;
  const double k = (scale.hi - scale.lo) / max_code;
  static const char* kNames[3] = {"R", "G", "B"};
  std::vector<Raster> out;
  for (std::size_t ch = 0; ch < c; ++ch) {
    out.emplace_back(w, h, gsd, c == 1 ? "PAN" : kNames[ch]);
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const unsigned char* p = pixels.data() + ((y * w + x) * c + ch) * bytes_per;
        const unsigned code = bytes_per == 1 ? p[0] : (static_cast<unsigned>(p[0]) << 8) | p[1];
        out[ch].at(x, y) = static_cast<float>(scale.lo + code * k);
      }
    }
  }
  return out;
}

}  // namespace rawsat
