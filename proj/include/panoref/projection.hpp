#pragma once

#include <optional>
#include <span>

#include "panoref/core.hpp"
#include "panoref/io.hpp"

namespace panoref {

inline constexpr double kDefaultMinDepth = 0.1;

struct PixelHit {
  int u{0};
  int v{0};
  double depth{0.0};  // camera-frame z
};

// Pinhole projection of a LiDAR-frame point. Nullopt when the point is at
// depth <= min_depth or lands outside [0, width) x [0, height).
std::optional<PixelHit> project_point(const CameraModel& camera, const Point3& p,
                                      double min_depth = kDefaultMinDepth);

// Primal labels: every point copies the label of the pixel it hits in the
// camera where it is nearest (lowest camera index on equal depth). Points no
// camera sees are (void, 0).
PanopticLabels label_points(const PointCloud& cloud, std::span<const CameraModel> cameras,
                            std::span<const LabelImage> images,
                            double min_depth = kDefaultMinDepth);

// Index of the camera label_points would sample for a point, if any.
std::optional<std::size_t> select_camera(std::span<const CameraModel> cameras, const Point3& p,
                                         double min_depth = kDefaultMinDepth);

}  // namespace panoref
