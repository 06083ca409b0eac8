#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "rawsat/error.hpp"
#include "rawsat/granule_io.hpp"
#include "rawsat/png_io.hpp"
#include "rawsat/resample.hpp"
#include "rawsat/stats.hpp"
#include "test_util.hpp"

namespace rawsat {
namespace {

using testing::constant_raster;
using testing::random_raster;
using testing::TempDir;

TEST(Raster, RejectsBadShapes) {
  EXPECT_THROW(Raster(0, 3, 1.0), SchemaError);
  EXPECT_THROW(Raster(2, 2, 1.0, "x", std::vector<float>(3)), SchemaError);
  EXPECT_THROW(Raster(2, 2, 0.0), SchemaError);
}

TEST(DownsampleBlock, HandMean) {
  Raster r(2, 2, 0.5, "PAN", {1, 2, 3, 4});
  const Raster d = downsample_block(r, 2);
  ASSERT_EQ(d.width(), 1u);
  EXPECT_FLOAT_EQ(d.at(0, 0), 2.5f);
}

TEST(DownsampleBlock, ConstantAndGsd) {
  const Raster c = constant_raster(16, 8, 37.25f);
  const Raster d = downsample_block(c, 4);
  EXPECT_EQ(d.width(), 4u);
  EXPECT_EQ(d.height(), 2u);
  EXPECT_DOUBLE_EQ(d.gsd(), 2.0);  // 0.5 m x4
  for (float v : d.values()) EXPECT_EQ(v, 37.25f);
}

TEST(DownsampleBlock, NonDivisibleIsAnError) {
  EXPECT_THROW(downsample_block(constant_raster(10, 8, 1), 4), SchemaError);
}

TEST(DownsampleBlock, PreservesGlobalMean) {
  const Raster r = random_raster(256, 128, 11);
  const Raster d = downsample_block(r, 4);
  const double a = mean_variance(r.values()).mean;
  const double b = mean_variance(d.values()).mean;
  EXPECT_NEAR(b, a, 1e-6 * std::abs(a));
}

TEST(UpsampleBicubic, FactorOneIsIdentity) {
  const Raster r = random_raster(17, 9, 3);
  EXPECT_EQ(upsample_bicubic(r, 1), r);
}

TEST(UpsampleBicubic, ConstantIsExact) {
  const Raster c = constant_raster(7, 5, 123.456f);
  const Raster u = upsample_bicubic(c, 4);
  EXPECT_EQ(u.width(), 28u);
  EXPECT_DOUBLE_EQ(u.gsd(), 0.125);
  for (float v : u.values()) EXPECT_EQ(v, 123.456f);
}

TEST(UpsampleBicubic, DownThenUpOfConstantIsExact) {
  const Raster c = constant_raster(64, 32, 801.5f);
  const Raster back = upsample_bicubic(downsample_block(c, 4), 4);
  EXPECT_TRUE(back.same_shape(c));
  for (float v : back.values()) EXPECT_EQ(v, 801.5f);
}

TEST(UpsampleBicubic, LinearRampPreservedInInterior) {
  const std::size_t w = 32, f = 4;
  Raster r(w, 6, 1.0);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < w; ++x) r.at(x, y) = 0.75f * static_cast<float>(x) + 2.0f;
  const Raster u = upsample_bicubic(r, f);
  // Taps stay in range once the source coordinate is in [1, w - 3].
  for (std::size_t xo = 2 * f; xo < (w - 3) * f; ++xo) {
    const double src = (xo + 0.5) / f - 0.5;
    for (std::size_t y = 0; y < u.height(); ++y) {
      EXPECT_NEAR(u.at(xo, y), 0.75 * src + 2.0, 1e-5) << xo;
    }
  }
}

TEST(ReflectIndex, WholeSampleSymmetry) {
  EXPECT_EQ(reflect_index(-1, 5), 1);
  EXPECT_EQ(reflect_index(-4, 5), 4);
  EXPECT_EQ(reflect_index(5, 5), 3);
  EXPECT_EQ(reflect_index(8, 5), 0);
  EXPECT_EQ(reflect_index(9, 5), 1);
  EXPECT_EQ(reflect_index(-7, 1), 0);
}

Granule random_granule(std::uint32_t seed, std::size_t xs = 25, std::size_t ratio = 4) {
  std::mt19937 gen(seed);
  Granule g;
  g.id = "g" + std::to_string(seed);
  g.pan_band = "PAN";
  g.put(random_raster(xs * ratio, xs * ratio, seed, -5, 5000, "PAN", 0.5));
  for (const char* b : {"R", "G", "B"}) {
    g.put(random_raster(xs, xs, seed + b[0], 0, 4000, b, 2.0));
    g.xs_bands.push_back(b);
  }
  std::uniform_real_distribution<double> u(0, static_cast<double>(xs * ratio) - 10);
  const int n = static_cast<int>(gen() % 5);
  for (int i = 0; i < n; ++i) {
    const double x = u(gen), y = u(gen);
    g.annotations.push_back({i, "cls" + std::to_string(i), {x, y, x + 3.25, y + 9.5}});
  }
  g.provenance.push_back({"synth", {{"k", std::to_string(seed)}}, seed});
  g.provenance.push_back({"degrade", {{"factor", 4}}, seed * 3ULL});
  return g;
}

TEST(GranuleIo, RoundTripIsBitExactForRandomGranules) {
  for (std::uint32_t seed = 1; seed <= 8; ++seed) {
    const Granule g = random_granule(seed);
    TempDir dir("io");
    write_granule(g, dir.path());
    const Granule back = read_granule(dir.path());
    EXPECT_EQ(back, g);
    TempDir dir2("io2");
    write_granule(back, dir2.path());
    for (const auto& entry : std::filesystem::directory_iterator(dir.path())) {
      std::ifstream a(entry.path(), std::ios::binary), b(dir2.path() / entry.path().filename(), std::ios::binary);
      std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
      EXPECT_EQ(sa, sb) << entry.path();
    }
  }
}

TEST(GranuleIo, EmptyAnnotationsSerializeAsEmptyArray) {
  Granule g = random_granule(3);
  g.annotations.clear();
  TempDir dir("empty");
  write_granule(g, dir.path());
  std::ifstream in(dir.path() / "meta.json");
  const auto meta = nlohmann::json::parse(in);
  EXPECT_TRUE(meta["annotations"].is_array());
  EXPECT_TRUE(meta["annotations"].empty());
  EXPECT_EQ(meta["pan_xs_ratio"], 4);
  EXPECT_EQ(meta["provenance"][0]["op"], "synth");
  EXPECT_EQ(meta["provenance"][1]["op"], "degrade");
}

TEST(GranuleIo, PanFourTimesXsIsAccepted) {
  Granule g;
  g.id = "ratio4";
  g.pan_band = "PAN";
  g.put(constant_raster(400, 400, 1.0f, "PAN"));
  g.put(constant_raster(100, 100, 1.0f, "R"));
  g.xs_bands = {"R"};
  TempDir dir("r4");
  write_granule(g, dir.path());
  EXPECT_EQ(read_granule(dir.path()).pan_xs_ratio(), 4u);
}

TEST(GranuleIo, ShortBandFileIsASizeMismatch) {
  Granule g;
  g.id = "short";
  g.pan_band = "PAN";
  g.put(constant_raster(100, 100, 1.0f, "PAN"));
  TempDir dir("short");
  write_granule(g, dir.path());
  std::filesystem::resize_file(dir.path() / "PAN.bin", 100 * 99 * sizeof(float));
  try {
    read_granule(dir.path());
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("band size mismatch"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("PAN"), std::string::npos);
  }
}

TEST(GranuleIo, OversizedAndMissingFilesAreFormatErrors) {
  Granule g;
  g.id = "x";
  g.pan_band = "PAN";
  g.put(constant_raster(8, 8, 1.0f, "PAN"));
  TempDir dir("over");
  write_granule(g, dir.path());
  {
    std::ofstream f(dir.path() / "PAN.bin", std::ios::binary | std::ios::app);
    f.put('\0');
  }
  EXPECT_THROW(read_granule(dir.path()), FormatError);
  std::filesystem::remove(dir.path() / "PAN.bin");
  try {
    read_granule(dir.path());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("'PAN'"), std::string::npos);
  }
}

TEST(GranuleIo, RatioMismatchIsSchemaError) {
  Granule g;
  g.id = "bad";
  g.pan_band = "PAN";
  g.put(constant_raster(40, 40, 1.0f, "PAN"));
  g.put(constant_raster(10, 10, 1.0f, "R"));
  g.xs_bands = {"R"};
  TempDir dir("ratio");
  write_granule(g, dir.path());
  std::ifstream in(dir.path() / "meta.json");
  auto meta = nlohmann::json::parse(in);
  in.close();
  meta["pan_xs_ratio"] = 2;
  std::ofstream(dir.path() / "meta.json") << meta.dump(2);
  EXPECT_THROW(read_granule(dir.path()), SchemaError);
}

TEST(Granule, AnnotationOutsidePanIsRejected) {
  Granule g;
  g.id = "a";
  g.pan_band = "PAN";
  g.put(constant_raster(10, 10, 1.0f));
  g.annotations.push_back({0, "v", {5, 5, 11, 8}});
  EXPECT_THROW(g.validate(), SchemaError);
}

TEST(Png, SixteenBitRoundTripWithinOneCode) {
  const Raster r = random_raster(13, 7, 5, 0, 4000);
  TempDir dir("png");
  const LinearScale s{0, 4000};
  write_png(dir.path() / "a.png", {&r}, 16, s);
  const auto back = read_png(dir.path() / "a.png", s, r.gsd());
  ASSERT_EQ(back.size(), 1u);
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_NEAR(back[0].values()[i], r.values()[i], 4000.0 / 65535.0 / 2 + 1e-3);
  }
}

TEST(Png, EightBitRgb) {
  const Raster a = random_raster(9, 4, 1, 0, 1), b = random_raster(9, 4, 2, 0, 1), c = random_raster(9, 4, 3, 0, 1);
  TempDir dir("rgb");
  write_png(dir.path() / "rgb.png", {&a, &b, &c}, 8, {0, 1});
  const auto back = read_png(dir.path() / "rgb.png", {0, 1});
  ASSERT_EQ(back.size(), 3u);
  EXPECT_NEAR(back[2].at(8, 3), c.at(8, 3), 0.5 / 255 + 1e-6);
}

TEST(Stats, PairwiseSumMatchesLongDouble) {
  const Raster r = random_raster(1000, 100, 77);
  long double ref = 0;
  for (float v : r.values()) ref += v;
  EXPECT_NEAR(pairwise_sum(r.values()), static_cast<double>(ref), 1e-9 * static_cast<double>(ref));
}

}  // namespace
}  // namespace rawsat
