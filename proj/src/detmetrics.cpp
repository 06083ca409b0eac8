#include "rawsat/detmetrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "rawsat/error.hpp"
#include "rawsat/parallel.hpp"

namespace rawsat {

using nlohmann::json;

void Detection::validate() const {
  if (!bbox.valid()) throw DataError("detection on " + image_id + " has an empty or inverted box");
  if (!(confidence >= 0 && confidence <= 1)) {
    throw DataError("detection on " + image_id + " has confidence outside [0,1]");
  }
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0 || ih <= 0) return 0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

namespace {

std::vector<std::size_t> confidence_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });
  return order;
}

// Per-detection outcome of image-wise matching, in input order.
struct Pooled {
  std::vector<bool> tp;
  std::vector<double> tp_iou;
  std::size_t n_tp = 0, n_fp = 0, n_fn = 0;
};

Pooled match_pooled(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts, double thresh) {
  std::unordered_map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_image;
  std::vector<std::string> images;
  auto slot = [&](const std::string& id) -> auto& {
    auto [it, fresh] = by_image.try_emplace(id);
    if (fresh) images.push_back(id);
    return it->second;
  };
  for (std::size_t i = 0; i < dets.size(); ++i) slot(dets[i].image_id).first.push_back(i);
  for (std::size_t i = 0; i < gts.size(); ++i) slot(gts[i].image_id).second.push_back(i);

  Pooled p;
  p.tp.assign(dets.size(), false);
  p.tp_iou.assign(dets.size(), 0.0);
  for (const auto& id : images) {
    const auto& [di, gi] = by_image[id];
    std::vector<Detection> d;
    std::vector<BBox> g;
    for (auto i : di) d.push_back(dets[i]);
    for (auto i : gi) g.push_back(gts[i].bbox);
    const Matching m = match(d, g, thresh);
    for (std::size_t k = 0; k < di.size(); ++k) {
      p.tp[di[k]] = m.det_to_gt[k] >= 0;
      p.tp_iou[di[k]] = m.det_iou[k];
    }
    p.n_tp += m.tp;
    p.n_fp += m.fp;
    p.n_fn += m.fn;
  }
  return p;
}

OperatingPoint rates(double conf, std::size_t tp, std::size_t fp, std::size_t fn) {
  OperatingPoint op{conf, tp, fp, fn, 0, 0, 0};
  if (tp + fp > 0) op.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) op.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (op.precision + op.recall > 0) op.f1 = 2 * op.precision * op.recall / (op.precision + op.recall);
  return op;
}

std::optional<std::size_t> threshold_index(const std::vector<double>& ts, double t) {
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (std::abs(ts[i] - t) < 1e-9) return i;
  return std::nullopt;
}

}  // namespace

Matching match(const std::vector<Detection>& dets, const std::vector<BBox>& gts, double iou_thresh) {
  Matching m;
  m.order = confidence_order(dets);
  m.det_to_gt.assign(dets.size(), -1);
  m.det_iou.assign(dets.size(), 0.0);
  m.gt_matched.assign(gts.size(), false);
  for (std::size_t d : m.order) {
    long best = -1;
    double best_iou = iou_thresh;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (m.gt_matched[g]) continue;
      const double v = iou(dets[d].bbox, gts[g]);
      if (v >= iou_thresh && (best < 0 || v > best_iou)) {
        best = static_cast<long>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      m.det_to_gt[d] = best;
      m.det_iou[d] = best_iou;
      m.gt_matched[static_cast<std::size_t>(best)] = true;
      ++m.tp;
    } else {
      ++m.fp;
    }
  }
  m.fn = gts.size() - m.tp;
  return m;
}

ApResult average_precision(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                           double iou_thresh) {
  ApResult r;
  r.n_gt = gts.size();
  r.n_det = dets.size();
  const Pooled p = match_pooled(dets, gts, iou_thresh);
  const auto order = confidence_order(dets);

  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    tp += p.tp[order[rank]];
    precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
    recall.push_back(r.n_gt ? static_cast<double>(tp) / static_cast<double>(r.n_gt) : 0.0);
    r.curve.push_back({dets[order[rank]].confidence, precision.back(), recall.back()});
  }
  if (r.n_gt == 0) {
    if (r.n_det > 0) r.ap = r.ap_all_point = 0.0;
    return r;
  }

  std::vector<double> envelope = precision;
  for (std::size_t i = envelope.size(); i-- > 1;) envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);

  double sum = 0;
  std::size_t i = 0;
  for (int k = 0; k <= 100; ++k) {
    const double level = k / 100.0;
    while (i < recall.size() && recall[i] < level) ++i;
    if (i == recall.size()) break;
    sum += envelope[i];
  }
  r.ap = sum / 101.0;

  double area = 0, prev = 0;
  for (std::size_t j = 0; j < recall.size(); ++j) {
    area += (recall[j] - prev) * envelope[j];
    prev = recall[j];
  }
  r.ap_all_point = area;
  return r;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw ConfigError("evaluate: iou_thresholds is empty");
  for (double t : iou_thresholds)
    if (!(t > 0 && t <= 1)) throw ConfigError("evaluate: IoU threshold outside (0,1]");
  if (!threshold_index(iou_thresholds, 0.5) || !threshold_index(iou_thresholds, 0.95)) {
    throw ConfigError("evaluate: iou_thresholds must include 0.5 and 0.95");
  }
  for (double t : confidence_thresholds)
    if (!(t >= 0 && t <= 1)) throw ConfigError("evaluate: confidence threshold outside [0,1]");
}

json EvalConfig::to_json() const {
  json names = json::object();
  for (const auto& [id, n] : class_names) names[std::to_string(id)] = n;
  return {{"iou_thresholds", iou_thresholds}, {"confidence_thresholds", confidence_thresholds}, {"class_names", names}};
}

EvalConfig EvalConfig::from_json(const json& j) {
  EvalConfig c;
  c.iou_thresholds = j.value("iou_thresholds", c.iou_thresholds);
  c.confidence_thresholds = j.value("confidence_thresholds", c.confidence_thresholds);
  if (j.contains("class_names"))
    for (const auto& [k, v] : j["class_names"].items()) c.class_names[std::stoi(k)] = v.get<std::string>();
  return c;
}

EvalReport evaluate(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts, const EvalConfig& cfg) {
  cfg.validate();
  for (const auto& d : dets) d.validate();
  for (const auto& g : gts)
    if (!g.bbox.valid()) throw DataError("ground truth on " + g.image_id + " has an empty or inverted box");

  std::map<int, std::string> classes = cfg.class_names;
  if (classes.empty())
    for (const auto& g : gts) classes.try_emplace(g.class_id, "class_" + std::to_string(g.class_id));
  auto check_known = [&](const std::set<int>& ids, const char* what) {
    std::string unknown;
    for (int id : ids)
      if (!classes.count(id)) unknown += (unknown.empty() ? "" : ", ") + std::to_string(id);
    if (!unknown.empty()) throw DataError(std::string("unknown class id(s) in ") + what + ": " + unknown);
  };
  std::set<int> det_ids, gt_ids;
  for (const auto& d : dets) det_ids.insert(d.class_id);
  for (const auto& g : gts) gt_ids.insert(g.class_id);
  check_known(det_ids, "detections");
  check_known(gt_ids, "ground truth");

  std::vector<int> ids;
  std::map<int, std::size_t> slot;
  for (const auto& [id, name] : classes) {
    slot[id] = ids.size();
    ids.push_back(id);
  }
  std::vector<std::vector<Detection>> cdets(ids.size());
  std::vector<std::vector<GroundTruth>> cgts(ids.size());
  for (const auto& d : dets) cdets[slot[d.class_id]].push_back(d);
  for (const auto& g : gts) cgts[slot[g.class_id]].push_back(g);

  EvalReport r;
  r.iou_thresholds = cfg.iou_thresholds;
  r.confidence_thresholds = cfg.confidence_thresholds;
  const std::size_t nt = cfg.iou_thresholds.size();
  const std::size_t i50 = *threshold_index(cfg.iou_thresholds, 0.5);
  const std::size_t i95 = *threshold_index(cfg.iou_thresholds, 0.95);

  std::vector<ApResult> ap(ids.size() * nt);
  parallel_for(ap.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) ap[k] = average_precision(cdets[k / nt], cgts[k / nt], cfg.iou_thresholds[k % nt]);
  });

  // Operating points at IoU 0.5: confidence 0 first (counts and TP IoU), then
  // each configured confidence threshold.
  std::vector<double> confs{0.0};
  confs.insert(confs.end(), cfg.confidence_thresholds.begin(), cfg.confidence_thresholds.end());
  std::vector<Pooled> ops(ids.size() * confs.size());
  parallel_for(ops.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const auto& all = cdets[k / confs.size()];
      std::vector<Detection> kept;
      for (const auto& d : all)
        if (d.confidence >= confs[k % confs.size()]) kept.push_back(d);
      ops[k] = match_pooled(kept, cgts[k / confs.size()], 0.5);
    }
  });

  double iou_sum = 0;
  std::size_t iou_n = 0;
  std::vector<OperatingPoint> totals(cfg.confidence_thresholds.size());
  for (std::size_t c = 0; c < ids.size(); ++c) {
    ClassReport cr;
    cr.class_id = ids[c];
    cr.name = classes[ids[c]];
    cr.n_gt = cgts[c].size();
    cr.n_det = cdets[c].size();
    for (std::size_t t = 0; t < nt; ++t) {
      cr.ap.push_back(ap[c * nt + t].ap);
      cr.ap_all_point.push_back(ap[c * nt + t].ap_all_point);
    }
    cr.pr_curve = ap[c * nt + i50].curve;

    const Pooled& base = ops[c * confs.size()];
    r.tp += base.n_tp;
    r.fp += base.n_fp;
    r.fn += base.n_fn;
    for (std::size_t i = 0; i < base.tp.size(); ++i)
      if (base.tp[i]) {
        iou_sum += base.tp_iou[i];
        ++iou_n;
      }
    for (std::size_t k = 1; k < confs.size(); ++k) {
      const Pooled& p = ops[c * confs.size() + k];
      cr.operating_points.push_back(rates(confs[k], p.n_tp, p.n_fp, p.n_fn));
      totals[k - 1].tp += p.n_tp;
      totals[k - 1].fp += p.n_fp;
      totals[k - 1].fn += p.n_fn;
    }
    r.classes.push_back(std::move(cr));
  }
  for (std::size_t k = 0; k < totals.size(); ++k)
    r.operating_points.push_back(rates(cfg.confidence_thresholds[k], totals[k].tp, totals[k].fp, totals[k].fn));
  r.mean_tp_iou = iou_n ? iou_sum / static_cast<double>(iou_n) : 0.0;

  auto class_mean = [&](auto pick) {
    double s = 0;
    std::size_t n = 0;
    for (const auto& cr : r.classes) {
      const auto v = pick(cr);
      if (v) {
        s += *v;
        ++n;
      }
    }
    return n ? s / static_cast<double>(n) : 0.0;
  };
  auto over_thresholds = [&](const std::vector<std::optional<double>>& v) -> std::optional<double> {
    if (!v[0]) return std::nullopt;
    double s = 0;
    for (const auto& x : v) s += *x;
    return s / static_cast<double>(v.size());
  };
  r.map50 = class_mean([&](const ClassReport& c) { return c.ap[i50]; });
  r.ap95 = class_mean([&](const ClassReport& c) { return c.ap[i95]; });
  r.map50_95 = class_mean([&](const ClassReport& c) { return over_thresholds(c.ap); });
  r.map50_all_point = class_mean([&](const ClassReport& c) { return c.ap_all_point[i50]; });
  r.ap95_all_point = class_mean([&](const ClassReport& c) { return c.ap_all_point[i95]; });
  r.map50_95_all_point = class_mean([&](const ClassReport& c) { return over_thresholds(c.ap_all_point); });
  return r;
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

json op_json(const OperatingPoint& o) {
  return {{"confidence", o.confidence}, {"tp", o.tp}, {"fp", o.fp}, {"fn", o.fn},
          {"precision", o.precision},   {"recall", o.recall}, {"f1", o.f1}};
}
OperatingPoint op_from(const json& j) {
  return {j.at("confidence"), j.at("tp"), j.at("fp"), j.at("fn"), j.at("precision"), j.at("recall"), j.at("f1")};
}

}  // namespace

json EvalReport::to_json() const {
  json cls = json::array();
  for (const auto& c : classes) {
    json ap_j = json::array(), apa_j = json::array(), pr = json::array(), ops = json::array();
    for (const auto& v : c.ap) ap_j.push_back(opt_json(v));
    for (const auto& v : c.ap_all_point) apa_j.push_back(opt_json(v));
    for (const auto& p : c.pr_curve) pr.push_back({p.confidence, p.precision, p.recall});
    for (const auto& o : c.operating_points) ops.push_back(op_json(o));
    cls.push_back({{"class_id", c.class_id},
                   {"name", c.name},
                   {"n_gt", c.n_gt},
                   {"n_det", c.n_det},
                   {"ap", ap_j},
                   {"ap_all_point", apa_j},
                   {"pr_curve_iou50", pr},
                   {"operating_points", ops}});
  }
  json ops = json::array();
  for (const auto& o : operating_points) ops.push_back(op_json(o));
  return {{"iou_thresholds", iou_thresholds},
          {"confidence_thresholds", confidence_thresholds},
          {"mAP50", map50},
          {"mAP50_95", map50_95},
          {"AP95", ap95},
          {"mAP50_all_point", map50_all_point},
          {"mAP50_95_all_point", map50_95_all_point},
          {"AP95_all_point", ap95_all_point},
          {"mean_tp_iou", mean_tp_iou},
          {"counts", {{"tp", tp}, {"fp", fp}, {"fn", fn}}},
          {"operating_points", ops},
          {"classes", cls}};
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  r.iou_thresholds = j.at("iou_thresholds").get<std::vector<double>>();
  r.confidence_thresholds = j.at("confidence_thresholds").get<std::vector<double>>();
  r.map50 = j.at("mAP50");
  r.map50_95 = j.at("mAP50_95");
  r.ap95 = j.at("AP95");
  r.map50_all_point = j.at("mAP50_all_point");
  r.map50_95_all_point = j.at("mAP50_95_all_point");
  r.ap95_all_point = j.at("AP95_all_point");
  r.mean_tp_iou = j.at("mean_tp_iou");
  r.tp = j.at("counts").at("tp");
  r.fp = j.at("counts").at("fp");
  r.fn = j.at("counts").at("fn");
  for (const auto& o : j.at("operating_points")) r.operating_points.push_back(op_from(o));
  for (const auto& cj : j.at("classes")) {
    ClassReport c;
    c.class_id = cj.at("class_id");
    c.name = cj.at("name");
    c.n_gt = cj.at("n_gt");
    c.n_det = cj.at("n_det");
    for (const auto& v : cj.at("ap")) c.ap.push_back(opt_from(v));
    for (const auto& v : cj.at("ap_all_point")) c.ap_all_point.push_back(opt_from(v));
    for (const auto& p : cj.at("pr_curve_iou50")) c.pr_curve.push_back({p[0], p[1], p[2]});
    for (const auto& o : cj.at("operating_points")) c.operating_points.push_back(op_from(o));
    r.classes.push_back(std::move(c));
  }
  return r;
}

namespace {

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
std::string num(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "kind,class_id,class_name,iou_threshold,confidence,ap,ap_all_point,precision,recall,f1,value\n";
  for (const auto& c : r.classes)
    for (std::size_t t = 0; t < r.iou_thresholds.size(); ++t)
      os << "class_ap," << c.class_id << ',' << csv_field(c.name) << ',' << num(r.iou_thresholds[t]) << ",,"
         << num(c.ap[t]) << ',' << num(c.ap_all_point[t]) << ",,,,\n";
  for (const auto& o : r.operating_points)
    os << "operating_point,,,0.5," << num(o.confidence) << ",,," << num(o.precision) << ',' << num(o.recall) << ','
       << num(o.f1) << ",\n";
  const std::pair<const char*, double> summary[] = {
      {"mAP50", r.map50}, {"mAP50_95", r.map50_95}, {"AP95", r.ap95}, {"mean_tp_iou", r.mean_tp_iou}};
  for (const auto& [k, v] : summary) os << k << ",,,,,,,,,," << num(v) << '\n';
  return os.str();
}

std::string report_svg(const EvalReport& r) {
  constexpr double W = 360, H = 300, M = 40;
  auto px = [&](double panel, double x) { return panel * (W + M) + M + x * W; };
  auto py = [&](double y) { return M + (1 - y) * H; };
  auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(2 * W + 3 * M) << "\" height=\"" << f(H + 2 * M)
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  const char* titles[] = {"precision vs recall (IoU 0.5)", "F1 vs confidence (IoU 0.5)"};
  for (int p = 0; p < 2; ++p) {
    os << "<rect x=\"" << f(px(p, 0)) << "\" y=\"" << f(py(1)) << "\" width=\"" << f(W) << "\" height=\"" << f(H)
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << f(px(p, 0)) << "\" y=\"" << f(M - 8) << "\">" << titles[p] << "</text>\n";
  }
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    const auto& cr = r.classes[c];
    const char* col = colors[c % std::size(colors)];
    os << "<polyline class=\"pr\" data-class=\"" << cr.class_id << "\" fill=\"none\" stroke=\"" << col << "\" points=\"";
    for (std::size_t i = 0; i < cr.pr_curve.size(); ++i)
      os << (i ? " " : "") << f(px(0, cr.pr_curve[i].recall)) << ',' << f(py(cr.pr_curve[i].precision));
    os << "\"/>\n";
    os << "<text x=\"" << f(px(0, 0) + 6) << "\" y=\"" << f(H + M - 6 - 14.0 * static_cast<double>(c))
       << "\" fill=\"" << col << "\">" << cr.name << "</text>\n";
  }
  os << "<polyline class=\"f1\" fill=\"none\" stroke=\"#000\" points=\"";
  for (std::size_t i = 0; i < r.operating_points.size(); ++i)
    os << (i ? " " : "") << f(px(1, r.operating_points[i].confidence)) << ',' << f(py(r.operating_points[i].f1));
  os << "\"/>\n</svg>\n";
  return os.str();
}

void report_emit(const EvalReport& r, const std::filesystem::path& dir, const std::vector<ReportFormat>& formats) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + (dir / name).string());
  };
  for (auto fmt : formats) {
    switch (fmt) {
      case ReportFormat::Json:
        write("report.json", r.to_json().dump(2) + "\n");
        break;
      case ReportFormat::Csv:
        write("report.csv", report_csv(r));
        break;
      case ReportFormat::Svg:
        write("curves.svg", report_svg(r));
        break;
    }
  }
}

std::vector<Detection> load_predictions(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw DataError("cannot open predictions " + jsonl.string());
  std::vector<Detection> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto b = j.at("bbox").get<std::vector<double>>();
      if (b.size() != 4) throw DataError("bbox needs 4 numbers");
      Detection d{j.at("image_id").get<std::string>(), j.at("class_id").get<int>(), j.at("confidence").get<double>(),
                  {b[0], b[1], b[2], b[3]}};
      d.validate();
      out.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw DataError(jsonl.string() + ":" + std::to_string(no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(jsonl.string() + ":" + std::to_string(no) + ": " + e.what());
    }
  }
  return out;
}

GroundTruthSet load_ground_truth(const std::filesystem::path& manifest, const std::string& split) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest " + manifest.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(manifest.string() + ": " + e.what());
  }
  const auto root = manifest.parent_path();
  const double ps = m.at("patch_size").get<double>();
  GroundTruthSet gt;
  for (const auto& [k, v] : m.at("class_map").items()) gt.class_names[std::stoi(k)] = v.get<std::string>();
  for (const auto& t : m.at("tiles")) {
    if (!split.empty() && t.at("split") != split) continue;
    const std::string id = std::filesystem::path(t.at("image").get<std::string>()).stem().string();
    gt.image_ids.push_back(id);
    const auto label = root / t.at("label").get<std::string>();
    std::ifstream lf(label);
    if (!lf) throw DataError("missing label file " + label.string());
    std::string line;
    while (std::getline(lf, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      int c;
      double cx, cy, w, h;
      if (!(ss >> c >> cx >> cy >> w >> h)) throw DataError("malformed label line in " + label.string());
      gt.boxes.push_back({id, c, {(cx - w / 2) * ps, (cy - h / 2) * ps, (cx + w / 2) * ps, (cy + h / 2) * ps}});
    }
  }
  return gt;
}

}  // namespace rawsat
