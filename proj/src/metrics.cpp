#include "panoref/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include <json.hpp>

#include "panoref/errors.hpp"

namespace panoref {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw LengthMismatch("prediction and ground truth differ in length");
}

void check_classes(std::span<const SemanticId> labels, const ClassTable& table) {
  for (auto s : labels)
    if (!table.contains(s)) throw FormatError("label outside the class table");
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
  return buf;
}

std::string signed_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.1f", 100.0 * v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

}  // namespace

IouResult miou(std::span<const SemanticId> pred, std::span<const SemanticId> gt, const ClassTable& table) {
  check_lengths(pred.size(), gt.size());
  check_classes(pred, table);
  check_classes(gt, table);
  const std::size_t c = table.size();
  std::vector<std::size_t> tp(c, 0), fp(c, 0), fn(c, 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == kVoid) continue;
    if (pred[i] == gt[i]) {
      ++tp[gt[i].value - 1];
    } else {
      ++fn[gt[i].value - 1];
      if (pred[i] != kVoid) ++fp[pred[i].value - 1];
    }
  }
  IouResult out;
  out.iou.assign(c, 0.0);
  out.present.assign(c, 0);
  std::size_t present = 0;
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t denom = tp[k] + fp[k] + fn[k];
    out.iou[k] = denom == 0 ? 0.0 : static_cast<double>(tp[k]) / static_cast<double>(denom);
    out.present[k] = (tp[k] + fn[k]) > 0;
    if (out.present[k]) {
      out.mean += out.iou[k];
      ++present;
    }
  }
  if (present > 0) out.mean /= static_cast<double>(present);
  return out;
}

PanopticEvaluator::PanopticEvaluator(const ClassTable& table) : table_(table) {
  for (const auto& info : table.classes()) {
    ClassMetrics m;
    m.name = info.name;
    m.thing = info.thing;
    classes_.push_back(m);
  }
}

void PanopticEvaluator::add_scan(const PanopticLabels& pred, const PanopticLabels& gt) {
  check_lengths(pred.size(), gt.size());
  check_lengths(pred.instance.size(), pred.size());
  check_lengths(gt.instance.size(), gt.size());
  check_classes(pred.semantic, table_);
  check_classes(gt.semantic, table_);

  // Segment key: class in the high half, instance (0 for stuff) in the low.
  auto key = [&](SemanticId s, InstanceId i) -> std::uint32_t {
    const std::uint32_t inst = table_.is_thing(s) ? i.value : 0u;
    return (static_cast<std::uint32_t>(s.value) << 16) | inst;
  };
  std::unordered_map<std::uint32_t, std::size_t> pred_area, gt_area;
  std::unordered_map<std::uint64_t, std::size_t> overlap;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt.semantic[i] == kVoid) continue;
    const auto g = key(gt.semantic[i], gt.instance[i]);
    ++gt_area[g];
    auto& cm = classes_[gt.semantic[i].value - 1];
    if (pred.semantic[i] == gt.semantic[i]) {
      ++cm.point_tp;
    } else {
      ++cm.point_fn;
      if (pred.semantic[i] != kVoid) ++classes_[pred.semantic[i].value - 1].point_fp;
    }
    if (pred.semantic[i] == kVoid) continue;
    const auto p = key(pred.semantic[i], pred.instance[i]);
    ++pred_area[p];
    ++overlap[(static_cast<std::uint64_t>(p) << 32) | g];
  }

  std::unordered_map<std::uint32_t, bool> pred_matched, gt_matched;
  for (const auto& [k, inter] : overlap) {
    const auto p = static_cast<std::uint32_t>(k >> 32);
    const auto g = static_cast<std::uint32_t>(k & 0xFFFFFFFFu);
    if ((p >> 16) != (g >> 16)) continue;
    const double uni = static_cast<double>(pred_area[p] + gt_area[g] - inter);
    const double iou = static_cast<double>(inter) / uni;
    if (iou > 0.5) {
      auto& cm = classes_[(g >> 16) - 1];
      ++cm.tp;
      cm.iou_sum += iou;
      pred_matched[p] = true;
      gt_matched[g] = true;
    }
  }
  for (const auto& [p, area] : pred_area)
    if (!pred_matched.count(p)) ++classes_[(p >> 16) - 1].fp;
  for (const auto& [g, area] : gt_area) {
    classes_[(g >> 16) - 1].in_gt = true;
    if (!gt_matched.count(g)) ++classes_[(g >> 16) - 1].fn;
  }
  ++scans_;
}

void PanopticEvaluator::merge(const PanopticEvaluator& other) {
  if (!(table_ == other.table_)) throw ClassTableMismatch("evaluators use different class tables");
  for (std::size_t k = 0; k < classes_.size(); ++k) {
    auto& a = classes_[k];
    const auto& b = other.classes_[k];
    a.in_gt = a.in_gt || b.in_gt;
    a.tp += b.tp;
    a.fp += b.fp;
    a.fn += b.fn;
    a.iou_sum += b.iou_sum;
    a.point_tp += b.point_tp;
    a.point_fp += b.point_fp;
    a.point_fn += b.point_fn;
  }
  scans_ += other.scans_;
}

EvalReport PanopticEvaluator::report() const {
  EvalReport out;
  out.classes = classes_;
  out.scan_count = scans_;
  std::size_t present = 0;
  for (auto& m : out.classes) {
    const double denom = static_cast<double>(m.tp) + 0.5 * static_cast<double>(m.fp) +
                         0.5 * static_cast<double>(m.fn);
    m.sq = m.tp == 0 ? 0.0 : m.iou_sum / static_cast<double>(m.tp);
    m.rq = denom == 0.0 ? 0.0 : static_cast<double>(m.tp) / denom;
    m.pq = denom == 0.0 ? 0.0 : m.iou_sum / denom;
    const std::size_t iou_denom = m.point_tp + m.point_fp + m.point_fn;
    m.iou = iou_denom == 0 ? 0.0 : static_cast<double>(m.point_tp) / static_cast<double>(iou_denom);
    if (m.in_gt) {
      out.pq += m.pq;
      out.sq += m.sq;
      out.rq += m.rq;
      out.miou += m.iou;
      ++present;
    }
  }
  if (present > 0) {
    const double k = static_cast<double>(present);
    out.pq /= k;
    out.sq /= k;
    out.rq /= k;
    out.miou /= k;
  }
  return out;
}

EvalReport panoptic_quality(const PanopticLabels& pred, const PanopticLabels& gt, const ClassTable& table) {
  PanopticEvaluator eval(table);
  eval.add_scan(pred, gt);
  return eval.report();
}

ReportDelta report_diff(const EvalReport& a, const EvalReport& b) {
  if (a.classes.size() != b.classes.size())
    throw ClassTableMismatch("reports cover different class lists");
  ReportDelta d;
  for (std::size_t k = 0; k < a.classes.size(); ++k) {
    const auto& x = a.classes[k];
    const auto& y = b.classes[k];
    if (x.name != y.name || x.thing != y.thing)
      throw ClassTableMismatch("class " + x.name + " does not match " + y.name);
    d.classes.push_back({x.name, x.pq - y.pq, x.sq - y.sq, x.rq - y.rq, x.iou - y.iou});
  }
  d.pq = a.pq - b.pq;
  d.sq = a.sq - b.sq;
  d.rq = a.rq - b.rq;
  d.miou = a.miou - b.miou;
  return d;
}

std::string render_report_text(const EvalReport& r) {
  std::size_t w = 6;
  for (const auto& c : r.classes) w = std::max(w, c.name.size() + 1);
  std::string out = pad("Metric", 7) + pad("Mean", w);
  for (const auto& c : r.classes) out += pad(c.name, w);
  out += '\n';
  auto row = [&](const char* label, double mean, auto field) {
    out += pad(label, 7) + pad(percent(mean), w);
    for (const auto& c : r.classes) out += pad(c.in_gt ? percent(field(c)) : "-", w);
    out += '\n';
  };
  row("PQ", r.pq, [](const ClassMetrics& c) { return c.pq; });
  row("SQ", r.sq, [](const ClassMetrics& c) { return c.sq; });
  row("RQ", r.rq, [](const ClassMetrics& c) { return c.rq; });
  row("mIoU", r.miou, [](const ClassMetrics& c) { return c.iou; });
  return out;
}

std::string render_delta_text(const ReportDelta& d) {
  std::size_t w = 7;
  for (const auto& c : d.classes) w = std::max(w, c.name.size() + 1);
  std::string out = pad("Delta", 7) + pad("Mean", w);
  for (const auto& c : d.classes) out += pad(c.name, w);
  out += '\n';
  auto row = [&](const char* label, double mean, auto field) {
    out += pad(label, 7) + pad(signed_percent(mean), w);
    for (const auto& c : d.classes) out += pad(signed_percent(field(c)), w);
    out += '\n';
  };
  row("PQ", d.pq, [](const ClassDelta& c) { return c.pq; });
  row("SQ", d.sq, [](const ClassDelta& c) { return c.sq; });
  row("RQ", d.rq, [](const ClassDelta& c) { return c.rq; });
  row("mIoU", d.miou, [](const ClassDelta& c) { return c.iou; });
  return out;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json doc;
  doc["schema"] = "panoref.eval_report";
  doc["version"] = 1;
  doc["config_hash"] = r.config_hash;
  doc["scan_count"] = r.scan_count;
  doc["mean"] = {{"pq", r.pq}, {"sq", r.sq}, {"rq", r.rq}, {"miou", r.miou}};
  doc["classes"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < r.classes.size(); ++k) {
    const auto& c = r.classes[k];
    doc["classes"].push_back({{"id", k + 1},
                              {"name", c.name},
                              {"thing", c.thing},
                              {"in_gt", c.in_gt},
                              {"pq", c.pq},
                              {"sq", c.sq},
                              {"rq", c.rq},
                              {"iou", c.iou},
                              {"tp", c.tp},
                              {"fp", c.fp},
                              {"fn", c.fn},
                              {"iou_sum", c.iou_sum},
                              {"point_tp", c.point_tp},
                              {"point_fp", c.point_fp},
                              {"point_fn", c.point_fn}});
  }
  return doc.dump(2) + "\n";
}

std::string delta_to_json(const ReportDelta& d) {
  nlohmann::ordered_json doc;
  doc["schema"] = "panoref.eval_delta";
  doc["version"] = 1;
  doc["mean"] = {{"pq", d.pq}, {"sq", d.sq}, {"rq", d.rq}, {"miou", d.miou}};
  doc["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : d.classes)
    doc["classes"].push_back({{"name", c.name}, {"pq", c.pq}, {"sq", c.sq}, {"rq", c.rq}, {"iou", c.iou}});
  return doc.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view json_text) {
  try {
    const auto doc = nlohmann::json::parse(json_text);
    if (doc.at("schema").get<std::string>() != "panoref.eval_report" || doc.at("version").get<int>() != 1)
      throw FormatError("unsupported report schema");
    EvalReport r;
    r.config_hash = doc.at("config_hash").get<std::string>();
    r.scan_count = doc.at("scan_count").get<std::size_t>();
    const auto& mean = doc.at("mean");
    r.pq = mean.at("pq").get<double>();
    r.sq = mean.at("sq").get<double>();
    r.rq = mean.at("rq").get<double>();
    r.miou = mean.at("miou").get<double>();
    for (const auto& c : doc.at("classes")) {
      ClassMetrics m;
      m.name = c.at("name").get<std::string>();
      m.thing = c.at("thing").get<bool>();
      m.in_gt = c.at("in_gt").get<bool>();
      m.pq = c.at("pq").get<double>();
      m.sq = c.at("sq").get<double>();
      m.rq = c.at("rq").get<double>();
      m.iou = c.at("iou").get<double>();
      m.tp = c.at("tp").get<std::size_t>();
      m.fp = c.at("fp").get<std::size_t>();
      m.fn = c.at("fn").get<std::size_t>();
      m.iou_sum = c.value("iou_sum", 0.0);
      m.point_tp = c.value("point_tp", std::size_t{0});
      m.point_fp = c.value("point_fp", std::size_t{0});
      m.point_fn = c.value("point_fn", std::size_t{0});
      r.classes.push_back(std::move(m));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

}  // namespace panoref
