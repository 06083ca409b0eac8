#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "rawsat/detmetrics.hpp"
#include "rawsat/error.hpp"
#include "rawsat/parallel.hpp"
#include "rawsat/synthdata.hpp"
#include "rawsat/tiling.hpp"
#include "metrics_oracle.hpp"
#include "test_util.hpp"

namespace rawsat {
namespace {

using namespace oracle;

inline void expect_close(const std::optional<double>& a, const std::optional<double>& b, double tol) {
  ASSERT_EQ(a.has_value(), b.has_value());
  if (a) {
    EXPECT_NEAR(*a, *b, tol);
  }
}

// ---- examples ----

TEST(Iou, HandAreas) {
  EXPECT_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
  EXPECT_EQ(iou({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0);
  EXPECT_EQ(iou({0, 0, 10, 10}, {10, 0, 20, 10}), 0.0);
  EXPECT_NEAR(iou({0, 0, 10, 10}, {5, 5, 15, 15}), 1.0 / 7.0, 1e-15);
}

TEST(Match, Examples) {
  const std::vector<BBox> gt{{0, 0, 10, 10}};
  auto m = match({{"i", 0, 0.9, {0, 0, 10, 10}}}, gt, 0.5);
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fn, 0u);

  m = match({{"i", 0, 0.8, {0, 0, 10, 10}}, {"i", 0, 0.9, {0, 0, 10, 10}}}, gt, 0.5);
  EXPECT_EQ(m.det_to_gt[1], 0);
  EXPECT_EQ(m.det_to_gt[0], -1);
  EXPECT_EQ(m.fp, 1u);

  // 9x10 overlap of a 10x10 box with a 10x10 box shifted by... IoU 0.45 exactly:
  // shift by s: inter = 10(10-s), union = 10(10+s) -> (10-s)/(10+s) = 0.45 at s = 55/14.5.
  const double s = 5.5 / 1.45;
  m = match({{"i", 0, 0.9, {s, 0, 10 + s, 10}}}, gt, 0.5);
  EXPECT_NEAR(iou({s, 0, 10 + s, 10}, gt[0]), 0.45, 1e-12);
  EXPECT_EQ(m.tp, 0u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 1u);

  // Ties in confidence keep input order.
  m = match({{"i", 0, 0.5, {0, 0, 10, 9}}, {"i", 0, 0.5, {0, 0, 10, 10}}}, gt, 0.5);
  EXPECT_EQ(m.order, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(m.det_to_gt[0], 0);
}

TEST(AveragePrecision, HandCases) {
  const std::vector<GroundTruth> gt{{"i", 0, {0, 0, 10, 10}}};
  const Detection hit{"i", 0, 0.9, {0, 0, 10, 10}}, miss{"i", 0, 0.8, {50, 50, 60, 60}};
  EXPECT_EQ(*average_precision({hit, miss}, gt, 0.5).ap, 1.0);
  Detection hit_low = hit, miss_high = miss;
  hit_low.confidence = 0.8;
  miss_high.confidence = 0.9;
  EXPECT_EQ(*average_precision({hit_low, miss_high}, gt, 0.5).ap, 0.5);
  EXPECT_EQ(*average_precision({hit_low, miss_high}, gt, 0.5).ap_all_point, 0.5);

  EXPECT_EQ(*average_precision({}, gt, 0.5).ap, 0.0);
  EXPECT_FALSE(average_precision({}, {}, 0.5).ap.has_value());
  EXPECT_EQ(*average_precision({hit}, {}, 0.5).ap, 0.0);
}

TEST(Evaluate, PerfectAndEmpty) {
  std::vector<GroundTruth> gt;
  std::vector<Detection> dets;
  for (int i = 0; i < 12; ++i) {
    const BBox b{i * 3.0, i * 2.0, i * 3.0 + 8, i * 2.0 + 5};
    gt.push_back({"im" + std::to_string(i % 3), i % 3, b});
    dets.push_back({"im" + std::to_string(i % 3), i % 3, 1.0, b});
  }
  const auto r = evaluate(dets, gt);
  EXPECT_EQ(r.map50, 1.0);
  EXPECT_EQ(r.map50_95, 1.0);
  EXPECT_EQ(r.ap95, 1.0);
  EXPECT_EQ(r.mean_tp_iou, 1.0);
  ASSERT_EQ(r.operating_points.size(), 3u);
  for (const auto& o : r.operating_points) EXPECT_EQ(o.f1, 1.0);

  const auto e = evaluate({}, gt);
  EXPECT_EQ(e.map50, 0.0);
  EXPECT_EQ(e.map50_95, 0.0);
  EXPECT_EQ(e.mean_tp_iou, 0.0);
  EXPECT_EQ(e.fn, gt.size());
  for (const auto& o : e.operating_points) EXPECT_EQ(o.f1, 0.0);
}

TEST(Evaluate, UnknownClassListsIds) {
  EvalConfig c = config_for(2);
  try {
    evaluate({{"a", 7, 0.5, {0, 0, 1, 1}}, {"a", 3, 0.5, {0, 0, 1, 1}}}, {{"a", 0, {0, 0, 1, 1}}}, c);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("3, 7"), std::string::npos) << e.what();
  }
  EvalConfig bad;
  bad.iou_thresholds = {0.5, 0.75};
  EXPECT_THROW(evaluate({}, {}, bad), ConfigError);
  EXPECT_THROW(evaluate({{"a", 0, 1.5, {0, 0, 1, 1}}}, {}, config_for(1)), DataError);
}

// ---- oracle equivalence and properties ----

TEST(Evaluate, MatchesBruteForceOracle) {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const Instance in = random_instance(gen);
    const EvalConfig cfg = config_for(in.n_classes);
    const EvalReport r = evaluate(in.dets, in.gts, cfg);
    ASSERT_EQ(r.classes.size(), static_cast<std::size_t>(in.n_classes));

    double m50 = 0, m95 = 0, m5095 = 0;
    std::size_t defined = 0;
    double iou_sum = 0;
    std::size_t iou_n = 0;
    for (int c = 0; c < in.n_classes; ++c) {
      const auto d = of_class(in.dets, c);
      const auto g = of_class(in.gts, c);
      double across = 0;
      for (std::size_t t = 0; t < cfg.iou_thresholds.size(); ++t) {
        const auto [ap, all] = oracle_ap(d, g, cfg.iou_thresholds[t]);
        expect_close(r.classes[c].ap[t], ap, 1e-12);
        expect_close(r.classes[c].ap_all_point[t], all, 1e-12);
        if (ap) across += *ap;
      }
      const auto [a50, x1] = oracle_ap(d, g, 0.5);
      const auto [a95, x2] = oracle_ap(d, g, 0.95);
      if (a50) {
        m50 += *a50;
        m95 += *a95;
        m5095 += across / 10;
        ++defined;
      }
      const auto m = oracle_match(d, g, 0.5);
      for (std::size_t i = 0; i < d.size(); ++i)
        if (m.tp[i]) {
          iou_sum += m.tp_iou[i];
          ++iou_n;
        }
    }
    if (defined) {
      EXPECT_NEAR(r.map50, m50 / defined, 1e-12);
      EXPECT_NEAR(r.ap95, m95 / defined, 1e-12);
      EXPECT_NEAR(r.map50_95, m5095 / defined, 1e-12);
    }
    EXPECT_NEAR(r.mean_tp_iou, iou_n ? iou_sum / iou_n : 0.0, 1e-12);

    for (std::size_t k = 0; k < cfg.confidence_thresholds.size(); ++k) {
      std::size_t tp = 0, kept = 0;
      for (int c = 0; c < in.n_classes; ++c) {
        std::vector<Detection> d;
        for (const auto& x : of_class(in.dets, c))
          if (x.confidence >= cfg.confidence_thresholds[k]) d.push_back(x);
        kept += d.size();
        tp += oracle_match(d, of_class(in.gts, c), 0.5).n_tp;
      }
      const auto& o = r.operating_points[k];
      const double p = kept ? double(tp) / kept : 0, rc = in.gts.empty() ? 0 : double(tp) / in.gts.size();
      EXPECT_NEAR(o.f1, p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0, 1e-12);
      // Operating-point bookkeeping.
      EXPECT_EQ(o.tp + o.fn, in.gts.size());
      EXPECT_EQ(o.tp + o.fp, kept);
      EXPECT_GE(o.f1, 0.0);
      EXPECT_LE(o.f1, 1.0);
      if (kept == 0) {
        EXPECT_EQ(o.f1, 0.0);
      }
    }
    EXPECT_LE(max_deviation(r, in, cfg), 1e-12);
    if (HasFailure()) {
      ADD_FAILURE() << "trial " << trial;
      return;
    }
  }
}

TEST(AveragePrecision, RankOnlyDependence) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    Instance in = random_instance(gen);
    const auto d = of_class(in.dets, 0);
    const auto g = of_class(in.gts, 0);
    auto t = d;
    for (auto& x : t) x.confidence = std::pow(x.confidence, 3) * 0.5 + 0.1;
    for (double thr : {0.5, 0.75}) {
      const auto a = average_precision(d, g, thr), b = average_precision(t, g, thr);
      expect_close(a.ap, b.ap, 0);
      expect_close(a.ap_all_point, b.ap_all_point, 0);
    }
  }
}

TEST(AveragePrecision, DuplicatesAndLateHits) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 300; ++trial) {
    const Instance in = random_instance(gen);
    auto d = of_class(in.dets, 0);
    const auto g = of_class(in.gts, 0);
    if (g.empty()) continue;
    // Duplicate of an already matched GT, at any confidence.
    const auto& target = g[gen() % g.size()];
    // A duplicate that also overlaps another GT could become a TP for it.
    bool isolated = true;
    for (const auto& o : g)
      if (&o != &target && o.image_id == target.image_id && iou(o.bbox, target.bbox) >= 0.5) isolated = false;
    if (!isolated) continue;
    auto with_hit = d;
    with_hit.push_back({target.image_id, 0, 1.0, target.bbox});
    const auto hit_ap = average_precision(with_hit, g, 0.5);
    auto with_dup = with_hit;
    with_dup.push_back({target.image_id, 0, (gen() % 11) / 10.0, target.bbox});
    EXPECT_LE(*average_precision(with_dup, g, 0.5).ap, *hit_ap.ap + 1e-15);

    // A new TP at the lowest rank never lowers final recall.
    auto extra = d;
    GroundTruth fresh{"fresh", 0, {500, 500, 510, 510}};
    auto g2 = g;
    g2.push_back(fresh);
    const auto before = average_precision(extra, g2, 0.5);
    extra.push_back({"fresh", 0, 0.0, fresh.bbox});
    const auto after = average_precision(extra, g2, 0.5);
    const double r0 = before.curve.empty() ? 0 : before.curve.back().recall;
    EXPECT_GE(after.curve.back().recall, r0);
  }
}

TEST(Evaluate, ThreadCountIndependent) {
  std::mt19937_64 gen(8);
  const Instance in = random_instance(gen);
  set_thread_count(1);
  const auto a = evaluate(in.dets, in.gts, config_for(in.n_classes)).to_json();
  set_thread_count(3);
  const auto b = evaluate(in.dets, in.gts, config_for(in.n_classes)).to_json();
  set_thread_count(0);
  EXPECT_EQ(a, b);
}

// ---- report emission and loaders ----

TEST(Report, JsonCsvSvg) {
  std::mt19937_64 gen(9);
  Instance in = random_instance(gen);
  while (in.n_classes < 2) in = random_instance(gen);
  const auto r = evaluate(in.dets, in.gts, config_for(in.n_classes));
  const auto j = r.to_json();
  EXPECT_EQ(EvalReport::from_json(j).to_json(), j);
  EXPECT_EQ(EvalReport::from_json(nlohmann::json::parse(j.dump())).to_json().dump(), j.dump());

  const std::string csv = report_csv(r);
  const auto rows = std::count(csv.begin(), csv.end(), '\n') - 1;
  EXPECT_EQ(static_cast<std::size_t>(rows), r.classes.size() * r.iou_thresholds.size() + 3 + 4);

  const std::string svg = report_svg(r);
  EXPECT_NE(svg.find("class=\"pr\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"f1\""), std::string::npos);

  testing::TempDir dir("report");
  report_emit(r, dir.path(), {ReportFormat::Json, ReportFormat::Csv, ReportFormat::Svg});
  report_emit(r, dir.path() / "again", {ReportFormat::Json, ReportFormat::Csv, ReportFormat::Svg});
  for (const char* f : {"report.json", "report.csv", "curves.svg"}) {
    std::ifstream a(dir.path() / f), b(dir.path() / "again" / f);
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
  }
}

TEST(Loaders, PredictionsAndManifestGroundTruth) {
  testing::TempDir dir("loaders");
  std::vector<Tile> tiles;
  const Granule g = synth_granule({.id = "gt", .width = 512, .height = 512, .seed = 1});
  for (auto& t : tile_object_centered(g, TileSpec{.seed = 2}).tiles) tiles.push_back(std::move(t));
  ExportOptions opt;
  opt.scale = {0, 1500};
  const auto manifest = export_dataset(tiles, dir.path() / "ds", opt);
  const auto gt = load_ground_truth(dir.path() / "ds" / "manifest.json");
  EXPECT_EQ(gt.image_ids.size(), tiles.size());
  std::size_t n = 0;
  for (const auto& t : tiles) n += t.labels.size();
  ASSERT_EQ(gt.boxes.size(), n);
  EXPECT_NEAR(gt.boxes[0].bbox.xmin, tiles[0].labels[0].bbox.xmin, 256 * 0.5e-6 * 2);
  EXPECT_TRUE(load_ground_truth(dir.path() / "ds" / "manifest.json", "val").boxes.empty());

  {
    std::ofstream p(dir.path() / "pred.jsonl");
    p << R"({"image_id":"a","class_id":1,"confidence":0.5,"bbox":[1,2,3,4]})" << "\n\n";
    p << R"({"image_id":"b","class_id":0,"confidence":0.25,"bbox":[0,0,9,9]})" << "\n";
  }
  const auto dets = load_predictions(dir.path() / "pred.jsonl");
  ASSERT_EQ(dets.size(), 2u);
  EXPECT_EQ(dets[0].bbox, (BBox{1, 2, 3, 4}));
  {
    std::ofstream p(dir.path() / "bad.jsonl");
    p << R"({"image_id":"a","class_id":1,"confidence":0.5,"bbox":[1,2,3,4]})" << "\n";
    p << R"({"image_id":"a","class_id":1,"confidence":0.5,"bbox":[5,2,3,4]})" << "\n";
  }
  try {
    load_predictions(dir.path() / "bad.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace rawsat
