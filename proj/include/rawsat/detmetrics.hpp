#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rawsat/raster.hpp"

namespace rawsat {

struct Detection {
  std::string image_id;
  int class_id = 0;
  double confidence = 0;
  BBox bbox;
  void validate() const;
};

struct GroundTruth {
  std::string image_id;
  int class_id = 0;
  BBox bbox;
};

double iou(const BBox& a, const BBox& b);

struct Matching {
  std::vector<std::size_t> order;      // detection indices, confidence descending
  std::vector<long> det_to_gt;         // per detection, -1 for a false positive
  std::vector<double> det_iou;         // IoU with the matched GT, 0 otherwise
  std::vector<bool> gt_matched;
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Greedy one-to-one matching for a single image and class. Detections are
// taken by confidence (ties: input order); each takes the unmatched GT with
// the highest IoU >= iou_thresh (ties: lower GT index).
Matching match(const std::vector<Detection>& dets, const std::vector<BBox>& gts, double iou_thresh);

struct PrPoint {
  double confidence, precision, recall;
};

struct ApResult {
  std::optional<double> ap;            // 101-point interpolated
  std::optional<double> ap_all_point;  // area under the precision envelope
  std::vector<PrPoint> curve;          // one point per ranked detection
  std::size_t n_gt = 0, n_det = 0;
};

// dets and gts of one class, pooled over images. Undefined (nullopt) with
// neither GT nor detections; 0 with detections but no GT.
ApResult average_precision(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                           double iou_thresh);

struct EvalConfig {
  std::vector<double> iou_thresholds{0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  std::vector<double> confidence_thresholds{0.25, 0.50, 0.75};
  // Known classes. Empty: the classes present in the ground truth.
  std::map<int, std::string> class_names;
  void validate() const;
  nlohmann::json to_json() const;
  static EvalConfig from_json(const nlohmann::json& j);
};

struct OperatingPoint {
  double confidence = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
};

struct ClassReport {
  int class_id = 0;
  std::string name;
  std::size_t n_gt = 0, n_det = 0;
  std::vector<std::optional<double>> ap;            // per IoU threshold
  std::vector<std::optional<double>> ap_all_point;  // per IoU threshold
  std::vector<PrPoint> pr_curve;                    // at IoU 0.5
  std::vector<OperatingPoint> operating_points;     // IoU 0.5, per confidence threshold
};

struct EvalReport {
  std::vector<double> iou_thresholds;
  std::vector<double> confidence_thresholds;
  std::vector<ClassReport> classes;
  double map50 = 0, map50_95 = 0, ap95 = 0;
  double map50_all_point = 0, map50_95_all_point = 0, ap95_all_point = 0;
  std::vector<OperatingPoint> operating_points;  // all classes, IoU 0.5
  double mean_tp_iou = 0;
  std::size_t tp = 0, fp = 0, fn = 0;  // IoU 0.5, confidence 0

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

// Class means skip classes whose AP is undefined. mAP50_95 averages over
// every configured IoU threshold; 0.5 and 0.95 must be among them.
EvalReport evaluate(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                    const EvalConfig& cfg = {});

std::string report_csv(const EvalReport& r);
std::string report_svg(const EvalReport& r);

enum class ReportFormat { Json, Csv, Svg };
// Writes report.json / report.csv / curves.svg under dir.
void report_emit(const EvalReport& r, const std::filesystem::path& dir, const std::vector<ReportFormat>& formats);

// One JSON object per line: {"image_id", "class_id", "confidence", "bbox"}.
std::vector<Detection> load_predictions(const std::filesystem::path& jsonl);

struct GroundTruthSet {
  std::vector<GroundTruth> boxes;
  std::vector<std::string> image_ids;  // every image, with or without labels
  std::map<int, std::string> class_names;
};

// Reads a dataset manifest and its label files. Image ids are the image file
// stems; boxes are in patch pixels. An empty split selects every tile.
GroundTruthSet load_ground_truth(const std::filesystem::path& manifest, const std::string& split = "");

}  // namespace rawsat
