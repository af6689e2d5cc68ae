#include "panoref/accumulate.hpp"

#include <limits>
#include <string>

#include <Eigen/Dense>

#include "panoref/errors.hpp"
#include "panoref/kdtree.hpp"

namespace panoref {

Scene accumulate(std::span<const PointCloud> scans, std::span<const PanopticLabels> labels,
                 std::span<const RigidTransform> poses) {
  if (scans.empty()) throw ConfigError("accumulate needs at least one scan");
  if (scans.size() != labels.size() || scans.size() != poses.size())
    throw ConfigError("accumulate: scans, labels and poses differ in count");
  if (scans.size() > std::numeric_limits<std::uint16_t>::max())
    throw ConfigError("accumulate: too many scans for one scene");

  std::size_t total = 0;
  for (std::size_t s = 0; s < scans.size(); ++s) {
    if (labels[s].size() != scans[s].size())
      throw ConfigError("accumulate: labels of scan " + std::to_string(s) + " do not match its cloud");
    total += scans[s].size();
  }

  Scene scene;
  scene.points.reserve(total);
  scene.scan_index.reserve(total);
  scene.source_index.reserve(total);
  scene.labels.semantic.reserve(total);
  scene.labels.instance.reserve(total);
  scene.poses.assign(poses.begin(), poses.end());
  for (std::size_t s = 0; s < scans.size(); ++s) {
    scene.scan_offsets.push_back(scene.points.size());
    scene.scan_sizes.push_back(scans[s].size());
    for (std::size_t i = 0; i < scans[s].size(); ++i) {
      scene.points.push_back(poses[s].apply(scans[s].points[i]));
      scene.scan_index.push_back(static_cast<std::uint16_t>(s));
      scene.source_index.push_back(static_cast<std::uint32_t>(i));
    }
    scene.labels.semantic.insert(scene.labels.semantic.end(), labels[s].semantic.begin(),
                                 labels[s].semantic.end());
    scene.labels.instance.insert(scene.labels.instance.end(), labels[s].instance.begin(),
                                 labels[s].instance.end());
  }
  return scene;
}

std::vector<PanopticLabels> split_scene(const Scene& scene, const PanopticLabels& refined) {
  if (refined.size() != scene.size() || refined.instance.size() != scene.size())
    throw ConfigError("split_scene: labels are not parallel to the scene");
  std::vector<PanopticLabels> out;
  out.reserve(scene.scan_count());
  for (std::size_t s = 0; s < scene.scan_count(); ++s) out.emplace_back(scene.scan_sizes[s]);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    auto& dst = out[scene.scan_index[i]];
    dst.semantic[scene.source_index[i]] = refined.semantic[i];
    dst.instance[scene.source_index[i]] = refined.instance[i];
  }
  return out;
}

std::vector<std::vector<SemanticId>> split_semantics(const Scene& scene,
                                                     std::span<const SemanticId> semantic) {
  if (semantic.size() != scene.size())
    throw ConfigError("split_semantics: labels are not parallel to the scene");
  std::vector<std::vector<SemanticId>> out;
  for (std::size_t s = 0; s < scene.scan_count(); ++s) out.emplace_back(scene.scan_sizes[s], kVoid);
  for (std::size_t i = 0; i < scene.size(); ++i)
    out[scene.scan_index[i]][scene.source_index[i]] = semantic[i];
  return out;
}

namespace {

struct Matches {
  std::vector<Eigen::Vector3d> src;
  std::vector<Eigen::Vector3d> dst;
  double inlier_sq_sum{0.0};
  double truncated_cost{0.0};
};

Matches match(const std::vector<Eigen::Vector3d>& moved, const KdTree& tree, double radius) {
  Matches m;
  const double r2 = radius * radius;
  for (const auto& p : moved) {
    const auto nn = tree.nearest(Point3::from_eigen(p));
    // Distance against the float-stored target; recompute in double from the
    // moved point to avoid rounding p to float.
    const Eigen::Vector3d q = tree.points()[nn->index].to_eigen();
    const double d2 = (p - q).squaredNorm();
    if (d2 <= r2) {
      m.src.push_back(p);
      m.dst.push_back(q);
      m.inlier_sq_sum += d2;
      m.truncated_cost += d2;
    } else {
      m.truncated_cost += r2;
    }
  }
  return m;
}

}  // namespace

IcpResult icp_align(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                    const IcpParams& params) {
  if (source.size() < 100 || target.size() < 100)
    throw DegenerateGeometry("icp_align needs at least 100 points in each cloud");

  const KdTree tree(target.points);
  std::vector<Eigen::Vector3d> base;
  base.reserve(source.size());
  for (const auto& p : source.points) base.push_back(p.to_eigen());

  IcpResult result;
  result.transform = init;
  const auto n = static_cast<double>(base.size());

  auto moved_by = [&](const RigidTransform& t) {
    std::vector<Eigen::Vector3d> moved(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) moved[i] = t.apply(base[i]);
    return moved;
  };

  Matches m = match(moved_by(result.transform), tree, params.correspondence_radius);
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    result.trace.push_back(std::sqrt(m.truncated_cost / n));
    if (m.src.size() < 3) break;

    Eigen::Vector3d mu_s = Eigen::Vector3d::Zero();
    Eigen::Vector3d mu_d = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < m.src.size(); ++i) {
      mu_s += m.src[i];
      mu_d += m.dst[i];
    }
    mu_s /= static_cast<double>(m.src.size());
    mu_d /= static_cast<double>(m.src.size());
    Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d spread = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < m.src.size(); ++i) {
      cross += (m.src[i] - mu_s) * (m.dst[i] - mu_d).transpose();
      spread += (m.src[i] - mu_s) * (m.src[i] - mu_s).transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(spread);
    const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
    if (ev(1) <= 1e-9 * std::max(ev(2), 1e-300))
      throw DegenerateGeometry("ICP correspondences are collinear");

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
    const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
    const Eigen::Vector3d t = mu_d - r * mu_s;
    const auto step = RigidTransform::orthonormalized(r, t, 1e-6);
    if (!step) throw DegenerateGeometry("ICP produced an invalid rotation");

    const RigidTransform next = compose(*step, result.transform);
    Matches next_m = match(moved_by(next), tree, params.correspondence_radius);
    // In exact arithmetic a step never raises the truncated cost; at the
    // rounding floor it can, and then the previous estimate is kept.
    if (next_m.truncated_cost > m.truncated_cost) {
      result.converged = true;
      break;
    }
    result.transform = next;
    result.iterations = iter + 1;
    m = std::move(next_m);

    // Largest displacement of any unit-distance point caused by this step.
    const double rot_change = (r - Eigen::Matrix3d::Identity()).norm();
    if (t.norm() + rot_change < params.convergence_threshold) {
      result.converged = true;
      break;
    }
  }
  result.trace.push_back(std::sqrt(m.truncated_cost / n));
  result.correspondences = m.src.size();
  result.rms_residual =
      m.src.empty() ? 0.0 : std::sqrt(m.inlier_sq_sum / static_cast<double>(m.src.size()));
  if (m.src.size() < 3) result.converged = false;
  return result;
}

}  // namespace panoref
