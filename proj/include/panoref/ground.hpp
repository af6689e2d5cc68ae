#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "panoref/accumulate.hpp"
#include "panoref/core.hpp"

namespace panoref {

// Concentric-zone ground segmenter. Each scan is divided (in its own sensor
// frame) into annular zones and azimuth sectors; every sector fits one plane
// by RANSAC on its lowest points and marks the points near an accepted plane
// as ground.
struct GroundParams {
  std::vector<double> zone_edges{15.0, 30.0, 50.0, 80.0};  // outer radii, meters
  int sectors{16};
  int ransac_iterations{100};
  double inlier_distance{0.2};
  double max_tilt_deg{25.0};
  double seed_band{0.5};               // seeds within +-band of the lowest-point estimate
  std::size_t lowest_point_count{20};  // points averaged for the lowest-point estimate
  std::size_t min_seed_points{10};
  std::uint64_t seed{0};

  void validate() const;
};

// Segments one scan given in its sensor frame. `stream` selects the RNG
// stream so that different scans draw independent samples.
std::vector<std::uint8_t> segment_ground_scan(std::span<const Point3> sensor_points,
                                              const GroundParams& params, std::uint64_t stream);

// Mask parallel to the scene (1 = ground). Points are segmented per source
// scan in that scan's sensor frame.
std::vector<std::uint8_t> segment_ground(const Scene& scene, const GroundParams& params);

}  // namespace panoref
