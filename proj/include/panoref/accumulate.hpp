#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "panoref/core.hpp"
#include "panoref/io.hpp"

namespace panoref {

// Temporally contiguous scans merged into one world frame. Point i came from
// point source_index[i] of scan scan_index[i].
struct Scene {
  std::vector<Point3> points;
  std::vector<std::uint16_t> scan_index;
  std::vector<std::uint32_t> source_index;
  PanopticLabels labels;
  std::vector<std::uint8_t> ground_mask;  // empty until ground segmentation ran
  std::vector<RigidTransform> poses;      // scan -> world, one per scan
  std::vector<std::size_t> scan_sizes;
  std::vector<std::size_t> scan_offsets;  // first scene index of each scan

  std::size_t size() const { return points.size(); }
  std::size_t scan_count() const { return scan_sizes.size(); }
};

// Concatenates scans in order, each transformed by its pose.
Scene accumulate(std::span<const PointCloud> scans, std::span<const PanopticLabels> labels,
                 std::span<const RigidTransform> poses);

// Per-scan views of a scene-parallel array, in original point order.
std::vector<PanopticLabels> split_scene(const Scene& scene, const PanopticLabels& refined);
std::vector<std::vector<SemanticId>> split_semantics(const Scene& scene,
                                                     std::span<const SemanticId> semantic);

struct IcpParams {
  int max_iterations{30};
  double correspondence_radius{1.0};
  double convergence_threshold{1e-4};
};

struct IcpResult {
  RigidTransform transform;
  double rms_residual{0.0};      // over inlier correspondences at the final transform
  bool converged{false};
  int iterations{0};
  std::size_t correspondences{0};
  // Truncated RMS cost sqrt(mean(min(d^2, r^2))) before each update and at
  // the end; non-increasing by construction.
  std::vector<double> trace;
};

// Point-to-point ICP estimating the transform mapping `source` onto `target`.
// Throws DegenerateGeometry when either cloud has fewer than 100 points or the
// matched source points are collinear.
IcpResult icp_align(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                    const IcpParams& params = {});

}  // namespace panoref
