#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "panoref/core.hpp"
#include "panoref/io.hpp"

namespace panoref {

struct ClassMetrics {
  std::string name;
  bool thing{false};
  bool in_gt{false};  // class has ground-truth points; only these enter the means
  // Segment matching (IoU > 0.5).
  std::size_t tp{0}, fp{0}, fn{0};
  double iou_sum{0.0};
  // Point-level confusion for the semantic IoU.
  std::size_t point_tp{0}, point_fp{0}, point_fn{0};
  double pq{0.0}, sq{0.0}, rq{0.0}, iou{0.0};
};

// Per-class and mean panoptic/semantic quality. All values are fractions in
// [0, 1]; classes[i] describes class id i + 1.
struct EvalReport {
  std::vector<ClassMetrics> classes;
  double pq{0.0}, sq{0.0}, rq{0.0}, miou{0.0};
  std::string config_hash;
  std::size_t scan_count{0};
};

struct IouResult {
  std::vector<double> iou;            // index = class id - 1
  std::vector<std::uint8_t> present;  // class has ground-truth points
  double mean{0.0};
};

IouResult miou(std::span<const SemanticId> pred, std::span<const SemanticId> gt, const ClassTable& table);

// Accumulates scans; segments are matched within a scan, counts summed over
// scans. Ground-truth void points are ignored entirely.
class PanopticEvaluator {
 public:
  explicit PanopticEvaluator(const ClassTable& table);
  void add_scan(const PanopticLabels& pred, const PanopticLabels& gt);
  void merge(const PanopticEvaluator& other);
  EvalReport report() const;
  std::size_t scan_count() const { return scans_; }

 private:
  ClassTable table_;
  std::vector<ClassMetrics> classes_;
  std::size_t scans_{0};
};

EvalReport panoptic_quality(const PanopticLabels& pred, const PanopticLabels& gt, const ClassTable& table);

struct ClassDelta {
  std::string name;
  double pq{0.0}, sq{0.0}, rq{0.0}, iou{0.0};
};

struct ReportDelta {
  std::vector<ClassDelta> classes;
  double pq{0.0}, sq{0.0}, rq{0.0}, miou{0.0};
};

// a - b, element-wise. Throws ClassTableMismatch if the class lists differ.
ReportDelta report_diff(const EvalReport& a, const EvalReport& b);

// Per-class table in percent: one column per class, rows PQ/SQ/RQ/IoU.
std::string render_report_text(const EvalReport& report);
std::string render_delta_text(const ReportDelta& delta);
std::string report_to_json(const EvalReport& report);
std::string delta_to_json(const ReportDelta& delta);
EvalReport report_from_json(std::string_view json_text);

}  // namespace panoref
