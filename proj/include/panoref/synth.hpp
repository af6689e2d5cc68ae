#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "panoref/core.hpp"
#include "panoref/io.hpp"

namespace panoref {

enum class ShapeKind { Box, Cylinder };

struct ObjectSpec {
  ShapeKind shape{ShapeKind::Box};
  SemanticId semantic;
  InstanceId instance;  // 0 for stuff objects
  double x{0.0}, y{0.0};  // footprint center
  double base_z{0.0};     // bottom face height
  double height{1.0};
  double length{1.0}, width{1.0};  // box extent along its yawed x / y axes
  double radius{0.5};              // cylinder
  double yaw{0.0};
};

struct LidarSpec {
  int rings{32};
  int azimuth_steps{1024};
  double fov_up_deg{10.0};
  double fov_down_deg{-30.0};
  double min_range{1.0};
  double max_range{100.0};
};

// Static analytic world: a square ground height field (zero-mean waves with
// standard deviation ground_noise_sigma), boxes and vertical cylinders, a
// sensor trajectory and a camera rig rigidly attached to the LiDAR.
struct WorldSpec {
  std::vector<ClassInfo> classes;
  SemanticId ground_class;
  double ground_extent{80.0};  // ground covers |x|, |y| <= extent
  double ground_noise_sigma{0.0};
  int ground_waves{8};
  std::vector<ObjectSpec> objects;
  std::vector<RigidTransform> trajectory;  // sensor -> world, one per scan
  LidarSpec lidar;
  std::vector<CameraModel> cameras;  // extrinsic maps LiDAR -> camera
};

inline constexpr std::int32_t kGroundSurface = -1;

struct SurfaceHit {
  double t;
  SemanticId semantic;
  InstanceId instance;
  std::int32_t surface;  // kGroundSurface or object index
};

class World {
 public:
  // Throws ConfigError on an empty spec, invalid classes or overlapping
  // objects.
  World(WorldSpec spec, std::uint64_t seed);

  const WorldSpec& spec() const { return spec_; }
  const ClassTable& classes() const { return table_; }

  double ground_height(double x, double y) const;
  // First surface along origin + t * dir for t in (0, max_t]; dir must be
  // unit length.
  std::optional<SurfaceHit> raycast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                    double max_t) const;
  // Distance from p to the given analytic surface (vertical offset for the
  // ground).
  double surface_distance(const Eigen::Vector3d& p, std::int32_t surface) const;

 private:
  struct Wave {
    double kx, ky, phase;
  };
  std::optional<double> hit_ground(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double max_t) const;

  WorldSpec spec_;
  ClassTable table_;
  std::vector<Wave> waves_;
  double amplitude_{0.0};
  double slope_bound_{0.0};
};

struct SyntheticDataset {
  ClassTable classes;
  std::vector<PointCloud> scans;  // sensor frame
  std::vector<RigidTransform> poses;
  std::vector<CameraModel> cameras;
  std::vector<std::vector<LabelImage>> label_images;  // [scan][camera]
  std::vector<PanopticLabels> gt_labels;
  std::vector<std::vector<std::int32_t>> surfaces;  // [scan][point] surface index
};

// Ray-casts every scan and renders every label image. Fully determined by
// (spec, seed).
SyntheticDataset generate_world(const WorldSpec& spec, std::uint64_t seed, std::size_t workers = 1);

// World spec JSON (see README for the schema). Throws ConfigError.
WorldSpec parse_world_spec(std::string_view json_text);
std::string format_world_spec(const WorldSpec& spec);

enum class RigLayout {
  Full,    // six overlapping cameras, 360 degree coverage
  Gapped,  // four narrower cameras with blind wedges between them
};

struct StandardWorldOptions {
  int scans{4};
  double scan_spacing{2.0};
  double sensor_height{1.8};
  LidarSpec lidar{32, 1024, 10.0, -30.0, 1.0, 80.0};
  int image_width{400};
  int image_height{300};
  RigLayout rig{RigLayout::Full};
  double ground_noise_sigma{0.03};
  int cars{8};
  int pedestrians{5};
  int construction_vehicles{2};
  int buildings{4};
  int trees{6};
};

// Class list used by the standard suite: driveable_surface, manmade,
// vegetation (stuff); car, pedestrian, construction_vehicle (things, the
// last marked rare).
std::vector<ClassInfo> standard_classes();
WorldSpec standard_world(std::uint64_t seed, const StandardWorldOptions& options = {});
std::vector<CameraModel> standard_rig(RigLayout layout, int width, int height);

enum class CorruptionKind { UniformFlip, BoundaryBandFlip, VoidDropout };

struct CorruptionModel {
  CorruptionKind kind{CorruptionKind::UniformFlip};
  double probability{0.0};
  double band_width{0.5};  // BoundaryBandFlip only, meters

  static CorruptionModel uniform_flip(double p) { return {CorruptionKind::UniformFlip, p, 0.0}; }
  static CorruptionModel boundary_band_flip(double p, double width) {
    return {CorruptionKind::BoundaryBandFlip, p, width};
  }
  static CorruptionModel void_dropout(double p) { return {CorruptionKind::VoidDropout, p, 0.0}; }
};

struct CorruptionResult {
  PanopticLabels labels;
  std::vector<std::uint32_t> corrupted;  // indices whose label changed, ascending
};

// Deterministic label noise on non-void points (optionally restricted by
// `eligible`):
//   UniformFlip       class replaced by a uniformly drawn other class;
//   BoundaryBandFlip  points within band_width of a differently labeled point
//                     take that neighbor's label (needs `points`);
//   VoidDropout       label replaced by (void, 0).
// Flipped thing labels keep the instance id when the source was a thing;
// everything else gets instance 0.
CorruptionResult corrupt_labels(const PanopticLabels& labels, const CorruptionModel& model,
                                std::uint64_t seed, const ClassTable& table,
                                std::span<const Point3> points = {},
                                std::span<const std::uint8_t> eligible = {});

}  // namespace panoref
