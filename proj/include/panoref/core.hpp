#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace panoref {

struct Point3 {
  float x{0.0f};
  float y{0.0f};
  float z{0.0f};

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
  Eigen::Vector3d to_eigen() const { return {x, y, z}; }
  static Point3 from_eigen(const Eigen::Vector3d& v) {
    return {static_cast<float>(v.x()), static_cast<float>(v.y()), static_cast<float>(v.z())};
  }

  friend bool operator==(const Point3&, const Point3&) = default;
};

// Squared Euclidean distance accumulated in double. Every geometric kernel
// (kd-tree, clustering, ICP) goes through this so that distance ties are
// resolved identically on every code path.
inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = static_cast<double>(a.x) - static_cast<double>(b.x);
  const double dy = static_cast<double>(a.y) - static_cast<double>(b.y);
  const double dz = static_cast<double>(a.z) - static_cast<double>(b.z);
  return dx * dx + dy * dy + dz * dz;
}

// ‖RᵀR − I‖∞ (largest absolute entry).
double orthonormality_error(const Eigen::Matrix3d& rotation);

// Rigid body transform p ↦ R·p + t. Always holds a proper rotation:
// ‖RᵀR − I‖∞ ≤ 1e-5 and det R = 1 ± 1e-5.
class RigidTransform {
 public:
  static constexpr double kTolerance = 1e-5;

  RigidTransform();
  // Throws InvariantViolation when the rotation is not orthonormal within
  // kTolerance.
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  // Accepts a rotation whose orthonormality error is within `tolerance` and
  // projects it onto SO(3) unless it already satisfies kTolerance, in which
  // case it is kept unchanged. Returns nullopt when the error is larger or the
  // matrix is a reflection.
  static std::optional<RigidTransform> orthonormalized(const Eigen::Matrix3d& rotation,
                                                       const Eigen::Vector3d& translation,
                                                       double tolerance);

  static RigidTransform identity() { return {}; }
  static RigidTransform translation(double x, double y, double z);
  static RigidTransform rotation_z(double radians);
  static RigidTransform from_yaw_translation(double yaw, const Eigen::Vector3d& t);

  // Row-major 3x4 [R | t]: r00 r01 r02 tx r10 r11 r12 ty r20 r21 r22 tz.
  std::array<double, 12> to_rows() const;

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Point3 apply(const Point3& p) const { return Point3::from_eigen(apply(p.to_eigen())); }
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }

 private:
  struct Unchecked {};
  RigidTransform(Unchecked, const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  friend RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
  friend RigidTransform inverse(const RigidTransform& t);

  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

// compose(a, b).apply(p) == a.apply(b.apply(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& t);
inline Point3 apply(const RigidTransform& t, const Point3& p) { return t.apply(p); }

// Ideal pinhole camera. `extrinsic` maps LiDAR-frame points into the camera
// frame (x right, y down, z forward).
class CameraModel {
 public:
  // Throws InvariantViolation unless fx, fy > 0, width, height > 0,
  // 0 < cx < width and 0 < cy < height.
  CameraModel(double fx, double fy, double cx, double cy, int width, int height,
              RigidTransform extrinsic = {});

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const RigidTransform& extrinsic() const { return extrinsic_; }

 private:
  double fx_, fy_, cx_, cy_;
  int width_, height_;
  RigidTransform extrinsic_;
};

struct SemanticId {
  std::uint16_t value{0};
  friend constexpr auto operator<=>(SemanticId, SemanticId) = default;
};

struct InstanceId {
  std::uint16_t value{0};
  friend constexpr auto operator<=>(InstanceId, InstanceId) = default;
};

inline constexpr SemanticId kVoid{0};
inline constexpr InstanceId kNoInstance{0};
// Internal marker for instance ids invalidated during correction. Never
// serialized.
inline constexpr InstanceId kUnknownInstance{0xFFFF};

// Packed on-disk label: semantic * 1000 + instance.
inline constexpr std::uint32_t kLabelModulus = 1000;
inline constexpr std::uint16_t kMaxInstanceId = kLabelModulus - 1;

// Throws SerializationError for UNKNOWN or instance ids above 999.
std::uint32_t pack_label(SemanticId semantic, InstanceId instance);
std::pair<SemanticId, InstanceId> unpack_label(std::uint32_t packed);

struct ClassInfo {
  std::string name;
  bool thing{false};
  bool rare{false};
};

// Semantic class set. Class ids are 1-based (id i names classes()[i - 1]);
// id 0 is void.
class ClassTable {
 public:
  // Throws InvariantViolation unless there is at least one thing class, one
  // stuff class, and names are unique and non-empty.
  explicit ClassTable(std::vector<ClassInfo> classes);

  std::size_t size() const { return classes_.size(); }
  const std::vector<ClassInfo>& classes() const { return classes_; }

  bool contains(SemanticId id) const { return id.value <= classes_.size(); }
  bool is_thing(SemanticId id) const;
  bool is_rare(SemanticId id) const;
  const std::string& name(SemanticId id) const;
  std::optional<SemanticId> find(std::string_view name) const;

  friend bool operator==(const ClassTable& a, const ClassTable& b);

 private:
  std::vector<ClassInfo> classes_;
};

bool operator==(const ClassInfo& a, const ClassInfo& b);

}  // namespace panoref
