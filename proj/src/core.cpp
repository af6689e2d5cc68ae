#include "panoref/core.hpp"

#include <set>

#include <Eigen/Dense>

#include "panoref/errors.hpp"

namespace panoref {

namespace {

// Nearest rotation in the Frobenius sense.
Eigen::Matrix3d project_to_so3(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

bool is_rotation(const Eigen::Matrix3d& r, double tolerance) {
  if (!r.allFinite()) return false;
  return orthonormality_error(r) <= tolerance && std::abs(r.determinant() - 1.0) <= tolerance;
}

}  // namespace

double orthonormality_error(const Eigen::Matrix3d& rotation) {
  return (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

RigidTransform::RigidTransform()
    : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation_, kTolerance))
    throw InvariantViolation("rotation matrix is not orthonormal");
  if (!translation_.allFinite()) throw InvariantViolation("translation is not finite");
}

std::optional<RigidTransform> RigidTransform::orthonormalized(const Eigen::Matrix3d& rotation,
                                                              const Eigen::Vector3d& translation,
                                                              double tolerance) {
  if (!rotation.allFinite() || !translation.allFinite()) return std::nullopt;
  if (orthonormality_error(rotation) > tolerance || rotation.determinant() <= 0.0)
    return std::nullopt;
  // Already-valid rotations are kept bit for bit.
  if (is_rotation(rotation, kTolerance)) return RigidTransform(Unchecked{}, rotation, translation);
  return RigidTransform(Unchecked{}, project_to_so3(rotation), translation);
}

RigidTransform RigidTransform::translation(double x, double y, double z) {
  return RigidTransform(Unchecked{}, Eigen::Matrix3d::Identity(), Eigen::Vector3d(x, y, z));
}

RigidTransform RigidTransform::rotation_z(double radians) {
  return from_yaw_translation(radians, Eigen::Vector3d::Zero());
}

RigidTransform RigidTransform::from_yaw_translation(double yaw, const Eigen::Vector3d& t) {
  Eigen::Matrix3d r;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return RigidTransform(Unchecked{}, r, t);
}

std::array<double, 12> RigidTransform::to_rows() const {
  std::array<double, 12> rows{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rows[r * 4 + c] = rotation_(r, c);
    rows[r * 4 + 3] = translation_(r);
  }
  return rows;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  Eigen::Matrix3d r = a.rotation_ * b.rotation_;
  if (orthonormality_error(r) > RigidTransform::kTolerance) r = project_to_so3(r);
  return RigidTransform(RigidTransform::Unchecked{}, r, a.rotation_ * b.translation_ + a.translation_);
}

RigidTransform inverse(const RigidTransform& t) {
  const Eigen::Matrix3d rt = t.rotation_.transpose();
  return RigidTransform(RigidTransform::Unchecked{}, rt, -(rt * t.translation_));
}

CameraModel::CameraModel(double fx, double fy, double cx, double cy, int width, int height,
                         RigidTransform extrinsic)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height), extrinsic_(extrinsic) {
  if (!(fx_ > 0.0) || !(fy_ > 0.0) || !std::isfinite(fx_) || !std::isfinite(fy_))
    throw InvariantViolation("camera focal lengths must be positive");
  if (width_ <= 0 || height_ <= 0) throw InvariantViolation("camera size must be positive");
  if (!(cx_ > 0.0 && cx_ < width_) || !(cy_ > 0.0 && cy_ < height_))
    throw InvariantViolation("camera principal point outside the image");
}

std::uint32_t pack_label(SemanticId semantic, InstanceId instance) {
  if (instance == kUnknownInstance)
    throw SerializationError("cannot serialize an UNKNOWN instance id");
  if (instance.value > kMaxInstanceId)
    throw SerializationError("instance id " + std::to_string(instance.value) + " exceeds 999");
  return static_cast<std::uint32_t>(semantic.value) * kLabelModulus + instance.value;
}

std::pair<SemanticId, InstanceId> unpack_label(std::uint32_t packed) {
  const std::uint32_t semantic = packed / kLabelModulus;
  if (semantic > 0xFFFF) throw SerializationError("packed label semantic out of range");
  return {SemanticId{static_cast<std::uint16_t>(semantic)},
          InstanceId{static_cast<std::uint16_t>(packed % kLabelModulus)}};
}

bool operator==(const ClassInfo& a, const ClassInfo& b) {
  return a.name == b.name && a.thing == b.thing && a.rare == b.rare;
}

ClassTable::ClassTable(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
  bool any_thing = false;
  bool any_stuff = false;
  std::set<std::string> names;
  for (const auto& c : classes_) {
    if (c.name.empty()) throw InvariantViolation("class name must not be empty");
    if (!names.insert(c.name).second) throw InvariantViolation("duplicate class name " + c.name);
    any_thing |= c.thing;
    any_stuff |= !c.thing;
  }
  if (!any_thing || !any_stuff)
    throw InvariantViolation("class table needs at least one thing and one stuff class");
  if (classes_.size() >= 0xFFFF) throw InvariantViolation("too many classes");
}

bool ClassTable::is_thing(SemanticId id) const {
  return id != kVoid && contains(id) && classes_[id.value - 1].thing;
}

bool ClassTable::is_rare(SemanticId id) const {
  return id != kVoid && contains(id) && classes_[id.value - 1].rare;
}

const std::string& ClassTable::name(SemanticId id) const {
  static const std::string void_name = "void";
  if (id == kVoid || !contains(id)) return void_name;
  return classes_[id.value - 1].name;
}

std::optional<SemanticId> ClassTable::find(std::string_view name) const {
  for (std::size_t i = 0; i < classes_.size(); ++i)
    if (classes_[i].name == name) return SemanticId{static_cast<std::uint16_t>(i + 1)};
  return std::nullopt;
}

bool operator==(const ClassTable& a, const ClassTable& b) { return a.classes_ == b.classes_; }

}  // namespace panoref
