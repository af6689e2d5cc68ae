#include <doctest.h>

#include <random>

#include "panoref/errors.hpp"
#include "panoref/projection.hpp"
#include "panoref/synth.hpp"

using namespace panoref;

namespace {

WorldSpec small_world() {
  WorldSpec w;
  w.classes = standard_classes();
  w.ground_class = *ClassTable(w.classes).find("driveable_surface");
  w.ground_extent = 40;
  w.ground_noise_sigma = 0.0;
  w.trajectory = {RigidTransform::translation(0, 0, 1.8), RigidTransform::translation(2, 0, 1.8)};
  w.lidar = {16, 256, 10.0, -30.0, 1.0, 60.0};
  w.cameras = standard_rig(RigLayout::Full, 160, 120);
  return w;
}

ObjectSpec box(SemanticId cls, std::uint16_t inst, double x, double y) {
  ObjectSpec o;
  o.shape = ShapeKind::Box;
  o.semantic = cls;
  o.instance = InstanceId{inst};
  o.x = x;
  o.y = y;
  o.base_z = 0.0;
  o.height = 1.5;
  o.length = 4.5;
  o.width = 1.9;
  return o;
}

}  // namespace

TEST_CASE("plane-only world") {
  const WorldSpec w = small_world();
  const auto data = generate_world(w, 1);
  REQUIRE(data.scans.size() == 2);
  for (std::size_t s = 0; s < data.scans.size(); ++s) {
    CHECK(data.scans[s].size() > 0);
    for (auto sem : data.gt_labels[s].semantic) CHECK(sem == w.ground_class);
    for (const auto& img : data.label_images[s])
      for (auto sem : img.semantic) CHECK((sem == w.ground_class || sem == kVoid));
  }
}

TEST_CASE("one box in the frustum") {
  WorldSpec w = small_world();
  const auto car = *ClassTable(w.classes).find("car");
  w.objects.push_back(box(car, 1, 10, 0));
  const auto data = generate_world(w, 2);
  std::size_t car_pixels = 0;
  for (const auto& img : data.label_images[0])
    for (std::size_t i = 0; i < img.semantic.size(); ++i)
      if (img.semantic[i] == car) {
        ++car_pixels;
        CHECK(img.instance[i].value == 1);
      }
  CHECK(car_pixels > 0);
  std::size_t car_points = 0;
  for (std::size_t i = 0; i < data.gt_labels[0].size(); ++i)
    if (data.gt_labels[0].semantic[i] == car) {
      ++car_points;
      CHECK(data.gt_labels[0].instance[i].value == 1);
    }
  CHECK(car_points > 0);
}

TEST_CASE("generator is deterministic and points lie on surfaces") {
  const WorldSpec w = standard_world(3, StandardWorldOptions{.scans = 2, .image_width = 200, .image_height = 150});
  const auto a = generate_world(w, 3, 1);
  const auto b = generate_world(w, 3, 4);
  const World world(w, 3);
  for (std::size_t s = 0; s < a.scans.size(); ++s) {
    CHECK(a.scans[s].points == b.scans[s].points);
    CHECK(a.scans[s].intensity == b.scans[s].intensity);
    CHECK(a.gt_labels[s] == b.gt_labels[s]);
    CHECK(a.label_images[s] == b.label_images[s]);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.scans[s].size(); ++i) {
      const Eigen::Vector3d p = a.poses[s].apply(a.scans[s].points[i].to_eigen());
      worst = std::max(worst, std::abs(world.surface_distance(p, a.surfaces[s][i])));
    }
    CHECK(worst <= 1e-4);
    CHECK_NOTHROW(a.scans[s].validate());
  }
}

TEST_CASE("projection of generated images reproduces ground truth") {
  const WorldSpec w = standard_world(4, StandardWorldOptions{.scans = 1});
  const auto data = generate_world(w, 4);
  const World world(w, 4);
  const auto& scan = data.scans[0];
  const auto labels = label_points(scan, data.cameras, data.label_images[0]);
  std::size_t visible = 0, agree = 0;
  const Eigen::Vector3d origin = data.poses[0].translation();
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const auto cam = select_camera(data.cameras, scan.points[i]);
    if (!cam) {
      CHECK(labels.semantic[i] == kVoid);
      continue;
    }
    // Unoccluded from the chosen camera: first hit along the pixel ray is
    // the point itself.
    const RigidTransform cam_to_world = compose(data.poses[0], inverse(data.cameras[*cam].extrinsic()));
    const Eigen::Vector3d c = cam_to_world.translation();
    const Eigen::Vector3d p = data.poses[0].apply(scan.points[i].to_eigen());
    const Eigen::Vector3d dir = (p - c).normalized();
    const auto hit = world.raycast(c, dir, (p - c).norm() + 1.0);
    if (!hit || std::abs(hit->t - (p - c).norm()) > 1e-3) continue;
    ++visible;
    agree += labels.semantic[i] == data.gt_labels[0].semantic[i] && labels.instance[i] == data.gt_labels[0].instance[i];
  }
  (void)origin;
  REQUIRE(visible > 1000);
  CHECK(double(agree) / double(visible) >= 0.99);
}

TEST_CASE("spec validation") {
  WorldSpec w = small_world();
  w.trajectory.clear();
  CHECK_THROWS_AS(World(w, 0), ConfigError);

  w = small_world();
  const auto car = *ClassTable(w.classes).find("car");
  w.objects = {box(car, 1, 10, 0), box(car, 2, 11, 0.5)};
  CHECK_THROWS_AS(World(w, 0), ConfigError);

  w = small_world();
  w.objects = {box(car, 0, 10, 0)};
  CHECK_THROWS_AS(World(w, 0), ConfigError);

  w = small_world();
  w.objects = {box(car, 1, 0, 0)};  // sensor inside the car
  w.objects[0].height = 3;
  CHECK_THROWS_AS(World(w, 0), ConfigError);
}

TEST_CASE("world spec json round trip") {
  const WorldSpec w = standard_world(5, StandardWorldOptions{.scans = 3});
  const WorldSpec back = parse_world_spec(format_world_spec(w));
  CHECK(back.objects.size() == w.objects.size());
  CHECK(back.trajectory.size() == 3);
  CHECK(format_world_spec(back) == format_world_spec(w));
  CHECK_THROWS_AS(parse_world_spec("{\"objects\": 3}"), ConfigError);
  CHECK_THROWS_AS(parse_world_spec("not json"), ConfigError);
  const WorldSpec shortcut = parse_world_spec(R"({"standard": {"scans": 2, "cars": 3}})");
  CHECK(shortcut.trajectory.size() == 2);
}

TEST_CASE("label corruption") {
  const ClassTable table(standard_classes());
  std::mt19937_64 rng(6);
  PanopticLabels labels;
  for (int i = 0; i < 10000; ++i) {
    const auto s = SemanticId{static_cast<std::uint16_t>(1 + rng() % 6)};
    labels.push_back(s, table.is_thing(s) ? InstanceId{static_cast<std::uint16_t>(1 + rng() % 9)} : kNoInstance);
  }

  const auto none = corrupt_labels(labels, CorruptionModel::uniform_flip(0.0), 1, table);
  CHECK(none.labels == labels);
  CHECK(none.corrupted.empty());

  const auto p2 = corrupt_labels(labels, CorruptionModel::uniform_flip(0.2), 1, table);
  const double frac = double(p2.corrupted.size()) / double(labels.size());
  CHECK(frac >= 0.18);
  CHECK(frac <= 0.22);
  CHECK(std::is_sorted(p2.corrupted.begin(), p2.corrupted.end()));
  std::size_t changed = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    changed += p2.labels.semantic[i] != labels.semantic[i];
    if (!table.is_thing(p2.labels.semantic[i])) CHECK(p2.labels.instance[i] == kNoInstance);
  }
  CHECK(changed == p2.corrupted.size());
  CHECK(corrupt_labels(labels, CorruptionModel::uniform_flip(0.2), 1, table).labels == p2.labels);
  CHECK(corrupt_labels(labels, CorruptionModel::uniform_flip(0.2), 2, table).labels != p2.labels);

  // Two-class world, p = 1: nothing agrees.
  const ClassTable two({{"road", false, false}, {"car", true, false}});
  PanopticLabels l2;
  for (int i = 0; i < 500; ++i) l2.push_back(SemanticId{static_cast<std::uint16_t>(1 + i % 2)}, InstanceId{0});
  const auto all = corrupt_labels(l2, CorruptionModel::uniform_flip(1.0), 3, two);
  for (std::size_t i = 0; i < l2.size(); ++i) CHECK(all.labels.semantic[i] != l2.semantic[i]);

  const auto drop = corrupt_labels(labels, CorruptionModel::void_dropout(0.3), 4, table);
  for (auto i : drop.corrupted) {
    CHECK(drop.labels.semantic[i] == kVoid);
    CHECK(drop.labels.instance[i] == kNoInstance);
  }

  std::vector<std::uint8_t> eligible(labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); i += 2) eligible[i] = 1;
  const auto some = corrupt_labels(labels, CorruptionModel::uniform_flip(0.5), 5, table, {}, eligible);
  for (auto i : some.corrupted) CHECK(eligible[i] == 1);
}

TEST_CASE("boundary band corruption stays near label boundaries") {
  const ClassTable table(standard_classes());
  std::vector<Point3> pts;
  PanopticLabels labels;
  for (int i = 0; i < 200; ++i) {
    pts.push_back({0.1f * i, 0, 0});
    labels.push_back(SemanticId{static_cast<std::uint16_t>(i < 100 ? 1 : 2)}, kNoInstance);
  }
  const auto out = corrupt_labels(labels, CorruptionModel::boundary_band_flip(1.0, 0.5), 7, table, pts);
  CHECK_FALSE(out.corrupted.empty());
  for (auto i : out.corrupted) CHECK(std::abs(pts[i].x - 9.95f) <= 0.56f);
}
