#include <doctest.h>

#include <random>
#include <set>

#include "panoref/accumulate.hpp"
#include "panoref/errors.hpp"

using namespace panoref;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, float extent = 10.0f) {
  std::uniform_real_distribution<float> u(-extent, extent);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
  return c;
}

PanopticLabels random_labels(std::mt19937_64& rng, std::size_t n) {
  PanopticLabels l;
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::uint16_t>(rng() % 4);
    l.push_back(SemanticId{s}, InstanceId{static_cast<std::uint16_t>(s >= 2 ? 1 + rng() % 9 : 0)});
  }
  return l;
}

// Points on three orthogonal faces of a unit cube scaled to `size`.
PointCloud structured_cloud(std::mt19937_64& rng, std::size_t n, double size) {
  std::uniform_real_distribution<double> u(0, size);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    switch (i % 3) {
      case 0: c.points.push_back(Point3::from_eigen({a, b, 0})); break;
      case 1: c.points.push_back(Point3::from_eigen({a, 0, b})); break;
      default: c.points.push_back(Point3::from_eigen({0, a, b}));
    }
  }
  return c;
}

}  // namespace

TEST_CASE("accumulate single scan with identity pose") {
  std::mt19937_64 rng(1);
  const std::vector<PointCloud> scans{random_cloud(rng, 50)};
  const std::vector<PanopticLabels> labels{random_labels(rng, 50)};
  const std::vector<RigidTransform> poses{RigidTransform::identity()};
  const Scene s = accumulate(scans, labels, poses);
  CHECK(s.points == scans[0].points);
  CHECK(s.labels == labels[0]);
  CHECK(s.scan_count() == 1);
}

TEST_CASE("two copies, second translated") {
  std::mt19937_64 rng(2);
  const auto c = random_cloud(rng, 40);
  const auto l = random_labels(rng, 40);
  const std::vector<PointCloud> scans{c, c};
  const std::vector<PanopticLabels> labels{l, l};
  const std::vector<RigidTransform> poses{RigidTransform::identity(), RigidTransform::translation(10, 0, 0)};
  const Scene s = accumulate(scans, labels, poses);
  REQUIRE(s.size() == 80);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(s.points[i] == c.points[i]);
    CHECK(s.points[40 + i].x == c.points[i].x + 10.0f);
    CHECK(s.points[40 + i].y == c.points[i].y);
    CHECK(s.points[40 + i].z == c.points[i].z);
    CHECK(s.scan_index[40 + i] == 1);
    CHECK(s.source_index[40 + i] == i);
  }
}

TEST_CASE("scene counts, mapping and split round trip") {
  std::mt19937_64 rng(3);
  std::vector<PointCloud> scans;
  std::vector<PanopticLabels> labels;
  std::vector<RigidTransform> poses;
  std::size_t total = 0;
  for (int k = 0; k < 5; ++k) {
    const std::size_t n = 10 + rng() % 90;
    total += n;
    scans.push_back(random_cloud(rng, n));
    labels.push_back(random_labels(rng, n));
    poses.push_back(RigidTransform::from_yaw_translation(0.3 * k, {double(k), 2.0 * k, 0}));
  }
  const Scene s = accumulate(scans, labels, poses);
  CHECK(s.size() == total);
  CHECK(s.labels.size() == total);

  std::set<std::pair<std::uint16_t, std::uint32_t>> seen;
  for (std::size_t i = 0; i < s.size(); ++i) {
    REQUIRE(s.scan_index[i] < 5);
    REQUIRE(s.source_index[i] < scans[s.scan_index[i]].size());
    CHECK(seen.insert({s.scan_index[i], s.source_index[i]}).second);
    const auto expect = poses[s.scan_index[i]].apply(scans[s.scan_index[i]].points[s.source_index[i]]);
    CHECK(s.points[i] == expect);
  }

  const auto back = split_scene(s, s.labels);
  REQUIRE(back.size() == 5);
  for (int k = 0; k < 5; ++k) CHECK(back[k] == labels[k]);

  PanopticLabels changed = s.labels;
  changed.semantic[17] = SemanticId{static_cast<std::uint16_t>((changed.semantic[17].value + 1) % 4)};
  changed.instance[17] = kNoInstance;
  const auto split = split_scene(s, changed);
  int differing = 0;
  for (int k = 0; k < 5; ++k)
    for (std::size_t i = 0; i < labels[k].size(); ++i)
      differing += split[k].semantic[i] != labels[k].semantic[i];
  CHECK(differing == 1);

  PanopticLabels short_labels(3);
  CHECK_THROWS_AS(split_scene(s, short_labels), ConfigError);
  const std::vector<RigidTransform> one_pose{poses[0]};
  CHECK_THROWS_AS(accumulate(scans, labels, one_pose), ConfigError);
}

TEST_CASE("icp identity") {
  std::mt19937_64 rng(4);
  const auto c = structured_cloud(rng, 600, 4.0);
  const auto r = icp_align(c, c, RigidTransform::identity());
  CHECK(r.converged);
  CHECK(r.rms_residual <= 1e-9);
  CHECK(r.transform.translation().norm() <= 1e-9);
}

TEST_CASE("icp recovers a translation") {
  std::mt19937_64 rng(5);
  const auto src = structured_cloud(rng, 900, 6.0);
  PointCloud tgt = src;
  for (auto& p : tgt.points) p.x += 0.5f;
  const auto r = icp_align(src, tgt, RigidTransform::identity());
  CHECK(r.converged);
  CHECK((r.transform.translation() - Eigen::Vector3d(0.5, 0, 0)).norm() <= 1e-3);
  CHECK((r.transform.rotation() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-3);
  REQUIRE(r.trace.size() >= 2);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1] * (1 + 1e-12));
}

TEST_CASE("icp residual trace is non-increasing under rotation and noise") {
  std::mt19937_64 rng(6);
  std::normal_distribution<float> noise(0.0f, 0.01f);
  for (int trial = 0; trial < 10; ++trial) {
    const auto src = structured_cloud(rng, 800, 5.0);
    const auto motion = RigidTransform::from_yaw_translation(0.05 * trial, {0.1 * trial, -0.05 * trial, 0.02});
    PointCloud tgt = src;
    for (auto& p : tgt.points) {
      p = motion.apply(p);
      p.x += noise(rng);
      p.y += noise(rng);
      p.z += noise(rng);
    }
    const auto r = icp_align(src, tgt, RigidTransform::identity());
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1] * (1 + 1e-12));
  }
}

TEST_CASE("icp on disjoint clouds does not converge") {
  std::mt19937_64 rng(7);
  const auto src = structured_cloud(rng, 300, 3.0);
  PointCloud tgt = src;
  for (auto& p : tgt.points) p.x += 100.0f;
  const auto r = icp_align(src, tgt, RigidTransform::identity());
  CHECK_FALSE(r.converged);
  CHECK(r.correspondences == 0);
}

TEST_CASE("icp degenerate inputs") {
  std::mt19937_64 rng(8);
  const auto small = structured_cloud(rng, 50, 3.0);
  const auto big = structured_cloud(rng, 300, 3.0);
  CHECK_THROWS_AS(icp_align(small, big, RigidTransform::identity()), DegenerateGeometry);
  PointCloud line;
  for (int i = 0; i < 200; ++i) line.points.push_back({0.05f * i, 0, 0});
  CHECK_THROWS_AS(icp_align(line, line, RigidTransform::identity()), DegenerateGeometry);
}
