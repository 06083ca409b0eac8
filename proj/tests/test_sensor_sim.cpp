#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "rawsat/error.hpp"
#include "rawsat/granule_io.hpp"
#include "rawsat/resample.hpp"
#include "rawsat/sensor_sim.hpp"
#include "test_util.hpp"

namespace rawsat {
namespace {

using testing::constant_raster;
using testing::random_raster;

TEST(Misregister, ZeroShiftIsIdentity) {
  const Raster r = random_raster(16, 16, 1);
  EXPECT_EQ(misregister(r, 0, 0), r);
}

TEST(Misregister, IntegerShiftDuplicatesBorderColumn) {
  const Raster r = random_raster(12, 8, 2);
  const Raster s = misregister(r, 1, 0);
  for (std::size_t y = 0; y < 8; ++y) {
    EXPECT_EQ(s.at(0, y), r.at(0, y));
    for (std::size_t x = 1; x < 12; ++x) EXPECT_EQ(s.at(x, y), r.at(x - 1, y));
  }
}

TEST(Misregister, HalfPixelOnRampGivesMidpoints) {
  Raster r(16, 4, 1.0);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 16; ++x) r.at(x, y) = 3.0f * static_cast<float>(x) + 1.0f;
  const Raster s = misregister(r, 0.5, 0);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 1; x < 16; ++x) EXPECT_NEAR(s.at(x, y), 0.5 * (r.at(x - 1, y) + r.at(x, y)), 1e-5);
}

TEST(Misregister, ShiftLimit) {
  const Raster r = random_raster(16, 16, 3);
  EXPECT_THROW(misregister(r, 4.0, 0), ConfigError);
  EXPECT_NO_THROW(misregister(r, 3.9, -3.9));
}

TEST(Quantize, EndpointsAndClamp) {
  Raster r(4, 1, 1.0, "x", {0.0f, 4095.0f, 4100.0f, -3.0f});
  const Raster q = quantize(r, 12, 4095.0);
  EXPECT_EQ(q.at(0, 0), 0.0f);
  EXPECT_EQ(q.at(1, 0), 4095.0f);
  EXPECT_EQ(q.at(2, 0), 4095.0f);
  EXPECT_EQ(q.at(3, 0), 0.0f);
  for (double rmax : {1.0, 777.7, 1e4, 3.3e5}) {
    Raster e(1, 1, 1.0, "x", {static_cast<float>(rmax)});
    for (int bits : {8, 12, 16}) EXPECT_EQ(quantize(e, bits, static_cast<float>(rmax)).at(0, 0), static_cast<float>(rmax));
  }
}

TEST(Quantize, IdempotentAndErrorBounded) {
  std::mt19937 g(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int bits = 8 + static_cast<int>(g() % 9);
    const double rmax = 10.0 + (g() % 100000) / 7.0;
    const Raster r = random_raster(37, 11, g(), 0, static_cast<float>(rmax));
    const Raster q = quantize(r, bits, rmax);
    EXPECT_EQ(quantize(q, bits, rmax), q);
    const double bound = rmax / (std::ldexp(2.0, bits) - 2.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
      // Float storage of the input and output adds at most one ulp each.
      EXPECT_LE(std::abs(q.values()[i] - r.values()[i]), bound * (1 + 1e-6) + 2e-7 * rmax);
    }
  }
}

TEST(Quantize, RejectsBadParameters) {
  const Raster r = constant_raster(2, 2, 1);
  EXPECT_THROW(quantize(r, 7, 1), ConfigError);
  EXPECT_THROW(quantize(r, 17, 1), ConfigError);
  EXPECT_THROW(quantize(r, 12, 0), ConfigError);
}

Granule source_granule(std::uint32_t seed = 1) {
  Granule g;
  g.id = "src";
  g.pan_band = "PAN";
  g.put(random_raster(128, 96, seed, 100, 2000, "PAN", 0.5));
  for (const char* b : {"R", "G", "B"}) {
    g.put(random_raster(32, 24, seed + b[0], 100, 2000, b, 2.0));
    g.xs_bands.push_back(b);
  }
  g.annotations.push_back({2, "tanker", {10.0, 20.0, 50.0, 36.0}});
  return g;
}

TEST(Degrade, FactorFourGivesTwoMeterPanAndScaledAnnotations) {
  DegradationConfig cfg;
  cfg.seed = 3;
  const Granule d = degrade(source_granule(), cfg);
  const Raster& pan = d.band("PAN_raw");
  EXPECT_EQ(d.pan_band, "PAN_raw");
  EXPECT_DOUBLE_EQ(pan.gsd(), 2.0);
  EXPECT_EQ(pan.width(), 32u);
  EXPECT_EQ(d.band("R_raw").width(), 8u);
  EXPECT_EQ(d.xs_bands, (std::vector<std::string>{"R_raw", "G_raw", "B_raw"}));
  ASSERT_EQ(d.annotations.size(), 1u);
  EXPECT_EQ(d.annotations[0].bbox, (BBox{2.5, 5.0, 12.5, 9.0}));
  EXPECT_EQ(d.provenance.back().op, "degrade");
  EXPECT_EQ(d.provenance.back().params["stage_order"],
            nlohmann::json({"downsample", "misregister", "mtf", "noise", "quantize"}));
}

TEST(Degrade, AllStagesDisabledIsDownsampleOnly) {
  const Granule g = source_granule();
  DegradationConfig cfg;
  cfg.stage_order.clear();
  const Granule d = degrade(g, cfg);
  EXPECT_EQ(d.band("PAN_raw").values().size(), 32u * 24u);
  Raster expect = downsample_block(g.band("G"), 4);
  expect.set_band_name("G_raw");
  EXPECT_EQ(d.band("G_raw"), expect);

  cfg.pre_downsample_factor = 1;
  const Granule same = degrade(g, cfg);
  for (const auto& name : {"PAN", "R", "G", "B"}) {
    EXPECT_EQ(same.band(std::string(name) + "_raw").values().size(), g.band(name).size());
    EXPECT_TRUE(std::equal(g.band(name).values().begin(), g.band(name).values().end(),
                           same.band(std::string(name) + "_raw").values().begin()));
  }
}

TEST(Degrade, DeterministicBytes) {
  DegradationConfig cfg;
  cfg.seed = 99;
  cfg.defaults.dx = 0.3;
  const Granule a = degrade(source_granule(), cfg);
  const Granule b = degrade(source_granule(), cfg);
  testing::TempDir da("da"), db("db");
  write_granule(a, da.path());
  write_granule(b, db.path());
  for (const auto& f : {"meta.json", "PAN_raw.bin", "R_raw.bin", "B_raw.bin"}) {
    std::ifstream x(da.path() / f, std::ios::binary), y(db.path() / f, std::ios::binary);
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(x), {}), std::string(std::istreambuf_iterator<char>(y), {}));
  }
  cfg.seed = 100;
  EXPECT_NE(degrade(source_granule(), cfg).band("PAN_raw"), a.band("PAN_raw"));
}

TEST(Degrade, BandsUseDistinctNoiseStreams) {
  Granule g;
  g.id = "flat";
  g.pan_band = "PAN";
  g.put(constant_raster(64, 64, 500, "PAN"));
  g.put(constant_raster(16, 16, 500, "R", 2.0));
  g.put(constant_raster(16, 16, 500, "G", 2.0));
  g.xs_bands = {"R", "G"};
  DegradationConfig cfg;
  cfg.radiometric_max = 1000;
  const Granule d = degrade(g, cfg);
  EXPECT_NE(d.band("R_raw").values()[0], d.band("G_raw").values()[0]);
}

TEST(Degrade, StageErrorsNameStageAndBand) {
  DegradationConfig cfg;
  cfg.bands["G"].noise = NoiseModel{-1.0, 0.0};
  try {
    degrade(source_granule(), cfg);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'noise'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'G'"), std::string::npos) << msg;
  }
}

TEST(DegradationConfig, JsonRoundTripAndAnchors) {
  DegradationConfig cfg;
  cfg.radiometric_max = 3000;
  cfg.bands["R"].dx = 0.25;
  cfg.stage_order = {Stage::Mtf, Stage::Noise};
  EXPECT_EQ(DegradationConfig::from_json(cfg.to_json()), cfg);

  const auto j = nlohmann::json::parse(R"({"noise": {"dark": [10, 26.0206], "bright": [1000, 46.0206], "snr_unit": "db"}})");
  const DegradationConfig c = DegradationConfig::from_json(j);
  EXPECT_NEAR(c.defaults.noise.alpha, 0.025, 1e-5);
  EXPECT_NEAR(c.defaults.noise.beta, 0.0, 1e-3);
}

TEST(DegradationConfig, DuplicateStageRejected) {
  DegradationConfig cfg;
  cfg.stage_order = {Stage::Mtf, Stage::Mtf};
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(stage_from_name("blur"), ConfigError);
}

}  // namespace
}  // namespace rawsat
