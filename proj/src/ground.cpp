#include "panoref/ground.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "panoref/errors.hpp"
#include "panoref/random.hpp"

namespace panoref {

void GroundParams::validate() const {
  if (zone_edges.empty()) throw ConfigError("ground: zone_edges must not be empty");
  double previous = 0.0;
  for (double e : zone_edges) {
    if (!(e > previous)) throw ConfigError("ground: zone_edges must be positive and increasing");
    previous = e;
  }
  if (sectors < 1) throw ConfigError("ground: sectors must be >= 1");
  if (ransac_iterations < 1) throw ConfigError("ground: ransac_iterations must be >= 1");
  if (!(inlier_distance > 0.0)) throw ConfigError("ground: inlier_distance must be positive");
  if (!(max_tilt_deg >= 0.0 && max_tilt_deg <= 90.0))
    throw ConfigError("ground: max_tilt_deg must be in [0, 90]");
  if (!(seed_band > 0.0)) throw ConfigError("ground: seed_band must be positive");
  if (lowest_point_count < 1) throw ConfigError("ground: lowest_point_count must be >= 1");
  if (min_seed_points < 3) throw ConfigError("ground: min_seed_points must be >= 3");
}

namespace {

struct Plane {
  Eigen::Vector3d normal;
  double offset;  // normal . p + offset = 0
  double distance(const Eigen::Vector3d& p) const { return std::abs(normal.dot(p) + offset); }
};

std::optional<Plane> fit_sector(std::span<const Point3> points, const std::vector<std::uint32_t>& members,
                                const GroundParams& params, RandomStream rng) {
  if (members.size() < params.min_seed_points) return std::nullopt;

  std::vector<float> heights;
  heights.reserve(members.size());
  for (auto i : members) heights.push_back(points[i].z);
  const std::size_t lowest = std::min(params.lowest_point_count, heights.size());
  std::partial_sort(heights.begin(), heights.begin() + static_cast<std::ptrdiff_t>(lowest), heights.end());
  double lpr = 0.0;
  for (std::size_t i = 0; i < lowest; ++i) lpr += heights[i];
  lpr /= static_cast<double>(lowest);

  std::vector<Eigen::Vector3d> seeds;
  for (auto i : members)
    // Open band: a surface exactly seed_band above the lowest points is not a seed.
    if (std::abs(points[i].z - lpr) < params.seed_band) seeds.push_back(points[i].to_eigen());
  if (seeds.size() < params.min_seed_points) return std::nullopt;

  std::optional<Plane> best;
  std::size_t best_count = 0;
  for (int it = 0; it < params.ransac_iterations; ++it) {
    const auto a = rng.below(seeds.size());
    const auto b = rng.below(seeds.size());
    const auto c = rng.below(seeds.size());
    if (a == b || b == c || a == c) continue;
    Eigen::Vector3d n = (seeds[b] - seeds[a]).cross(seeds[c] - seeds[a]);
    if (n.norm() < 1e-9) continue;
    n.normalize();
    const Plane plane{n, -n.dot(seeds[a])};
    std::size_t count = 0;
    for (const auto& s : seeds) count += plane.distance(s) <= params.inlier_distance;
    if (count > best_count) {
      best_count = count;
      best = plane;
    }
  }
  if (!best || best_count < 3) return std::nullopt;

  // Least-squares refit on the consensus set.
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  std::size_t n_in = 0;
  for (const auto& s : seeds)
    if (best->distance(s) <= params.inlier_distance) {
      mean += s;
      ++n_in;
    }
  mean /= static_cast<double>(n_in);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& s : seeds)
    if (best->distance(s) <= params.inlier_distance) cov += (s - mean) * (s - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  if (eig.eigenvalues()(1) > 1e-12) {
    const Eigen::Vector3d n = eig.eigenvectors().col(0).normalized();
    best = Plane{n, -n.dot(mean)};
  }

  const double tilt = std::acos(std::min(1.0, std::abs(best->normal.z()))) * 180.0 / std::numbers::pi;
  if (tilt > params.max_tilt_deg) return std::nullopt;
  return best;
}

}  // namespace

std::vector<std::uint8_t> segment_ground_scan(std::span<const Point3> points, const GroundParams& params,
                                              std::uint64_t stream) {
  params.validate();
  const std::size_t zones = params.zone_edges.size();
  const auto sectors = static_cast<std::size_t>(params.sectors);
  std::vector<std::vector<std::uint32_t>> buckets(zones * sectors);

  for (std::size_t i = 0; i < points.size(); ++i) {
    const double r = std::hypot(static_cast<double>(points[i].x), static_cast<double>(points[i].y));
    const auto zone_it = std::upper_bound(params.zone_edges.begin(), params.zone_edges.end(), r);
    if (zone_it == params.zone_edges.end()) continue;  // beyond the outermost zone: non-ground
    const auto zone = static_cast<std::size_t>(zone_it - params.zone_edges.begin());
    const double azimuth = std::atan2(static_cast<double>(points[i].y), static_cast<double>(points[i].x));
    auto sector = static_cast<std::size_t>((azimuth + std::numbers::pi) / (2.0 * std::numbers::pi) *
                                           static_cast<double>(sectors));
    sector = std::min(sector, sectors - 1);
    buckets[zone * sectors + sector].push_back(static_cast<std::uint32_t>(i));
  }

  std::vector<std::uint8_t> mask(points.size(), 0);
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    const RandomStream rng(derive_seed(params.seed, stream), b);
    const auto plane = fit_sector(points, buckets[b], params, rng);
    if (!plane) continue;
    for (auto i : buckets[b])
      if (plane->distance(points[i].to_eigen()) <= params.inlier_distance) mask[i] = 1;
  }
  return mask;
}

std::vector<std::uint8_t> segment_ground(const Scene& scene, const GroundParams& params) {
  params.validate();
  std::vector<std::uint8_t> mask(scene.size(), 0);
  for (std::size_t s = 0; s < scene.scan_count(); ++s) {
    const RigidTransform to_sensor = inverse(scene.poses[s]);
    const std::size_t offset = scene.scan_offsets[s];
    std::vector<Point3> local(scene.scan_sizes[s]);
    for (std::size_t i = 0; i < local.size(); ++i) local[i] = to_sensor.apply(scene.points[offset + i]);
    const auto scan_mask = segment_ground_scan(local, params, s);
    std::copy(scan_mask.begin(), scan_mask.end(), mask.begin() + static_cast<std::ptrdiff_t>(offset));
  }
  return mask;
}

}  // namespace panoref
