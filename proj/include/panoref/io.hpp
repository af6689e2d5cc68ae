#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panoref/core.hpp"

namespace panoref {

// One LiDAR sweep in its sensor frame. `intensity` and `ring` are either
// empty or parallel to `points`.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<float> intensity;
  std::vector<std::uint8_t> ring;
  std::string scan_id;
  std::int64_t timestamp_us{0};

  std::size_t size() const { return points.size(); }
  // Throws InvariantViolation on empty clouds, mismatched arrays, non-finite
  // coordinates or intensities outside [0, 1].
  void validate() const;
};

// Per-point (semantic, instance) pairs parallel to one cloud or scene.
struct PanopticLabels {
  std::vector<SemanticId> semantic;
  std::vector<InstanceId> instance;

  PanopticLabels() = default;
  explicit PanopticLabels(std::size_t n) : semantic(n, kVoid), instance(n, kNoInstance) {}

  std::size_t size() const { return semantic.size(); }
  void push_back(SemanticId s, InstanceId i) {
    semantic.push_back(s);
    instance.push_back(i);
  }
  friend bool operator==(const PanopticLabels&, const PanopticLabels&) = default;
};

// Dense 2D panoptic label map, row-major.
struct LabelImage {
  int width{0};
  int height{0};
  std::vector<SemanticId> semantic;
  std::vector<InstanceId> instance;

  LabelImage() = default;
  LabelImage(int w, int h)
      : width(w), height(h), semantic(static_cast<std::size_t>(w) * h, kVoid),
        instance(static_cast<std::size_t>(w) * h, kNoInstance) {}

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  friend bool operator==(const LabelImage&, const LabelImage&) = default;
};

// --- point clouds: 5 little-endian float32 per point (x, y, z, intensity, ring)

inline constexpr std::size_t kPointRecordBytes = 20;

PointCloud decode_point_cloud(std::span<const std::byte> bytes, std::string scan_id = {});
std::vector<std::byte> encode_point_cloud(const PointCloud& cloud);
PointCloud read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path);

// --- label images: 16-bit grayscale PNG, pixel = semantic * 1000 + instance

LabelImage decode_label_image(std::span<const std::byte> png, const ClassTable& table);
std::vector<std::byte> encode_label_image(const LabelImage& image);
LabelImage read_label_image(const std::filesystem::path& path, const ClassTable& table);
void write_label_image(const LabelImage& image, const std::filesystem::path& path);

// --- calibration and poses (whitespace-separated text, '#' comments)
//
// calibration: one camera per line
//   width height fx fy cx cy r00 r01 r02 tx r10 r11 r12 ty r20 r21 r22 tz
// poses: one scan per line, 12 reals of the row-major [R | t], scan -> world.
//
// Rotations already orthonormal within 1e-5 are kept as written, those within
// 1e-3 are re-orthonormalized, anything worse is a FormatError.

inline constexpr double kFileRotationTolerance = 1e-3;

std::vector<CameraModel> parse_calibration(std::string_view text);
std::string format_calibration(std::span<const CameraModel> cameras);
std::vector<CameraModel> read_calibration(const std::filesystem::path& path);
void write_calibration(std::span<const CameraModel> cameras, const std::filesystem::path& path);

std::vector<RigidTransform> parse_poses(std::string_view text);
std::string format_poses(std::span<const RigidTransform> poses);
std::vector<RigidTransform> read_poses(const std::filesystem::path& path);
void write_poses(std::span<const RigidTransform> poses, const std::filesystem::path& path);

// --- point labels: little-endian uint32 packed labels, one per point

PanopticLabels decode_labels(std::span<const std::byte> bytes, const ClassTable& table);
std::vector<std::byte> encode_labels(const PanopticLabels& labels);
PanopticLabels read_labels(const std::filesystem::path& path, const ClassTable& table);
void write_labels(const PanopticLabels& labels, const std::filesystem::path& path);

// --- class table (JSON: {"classes": [{"name", "thing", "rare"}, ...]})

ClassTable parse_class_table(std::string_view json_text);
std::string format_class_table(const ClassTable& table);
ClassTable read_class_table(const std::filesystem::path& path);
void write_class_table(const ClassTable& table, const std::filesystem::path& path);

// Whole-file helpers. Throw IoError.
std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_file_text(const std::filesystem::path& path, std::string_view text);

}  // namespace panoref
