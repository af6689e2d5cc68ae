#include <doctest.h>

#include <filesystem>

#include "panoref/errors.hpp"
#include "panoref/pipeline.hpp"
#include "panoref/random.hpp"

using namespace panoref;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "panoref_test_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const SyntheticDataset& dataset() {
  static const SyntheticDataset data = [] {
    StandardWorldOptions o;
    o.scans = 3;
    return generate_world(standard_world(21, o), 21);
  }();
  return data;
}

std::vector<PanopticLabels> primal_of(const SyntheticDataset& d, double flip) {
  std::vector<PanopticLabels> out;
  for (std::size_t s = 0; s < d.scans.size(); ++s) {
    const auto projected = label_points(d.scans[s], d.cameras, d.label_images[s]);
    std::vector<std::uint8_t> eligible(projected.size());
    for (std::size_t i = 0; i < eligible.size(); ++i) eligible[i] = d.classes.is_thing(d.gt_labels[s].semantic[i]);
    out.push_back(corrupt_labels(projected, CorruptionModel::uniform_flip(flip), derive_seed(1, s), d.classes,
                                 d.scans[s].points, eligible)
                      .labels);
  }
  return out;
}

}  // namespace

TEST_CASE("cluster_scene covers every point") {
  const auto& d = dataset();
  const auto primal = primal_of(d, 0.0);
  Scene scene = accumulate(d.scans, primal, d.poses);
  PipelineParams params;
  scene.ground_mask = segment_ground(scene, params.ground);
  const auto c = cluster_scene(scene, params);
  REQUIRE(c.cluster_ids.size() == scene.size());
  std::vector<std::size_t> members(static_cast<std::size_t>(c.count()), 0);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    REQUIRE(c.cluster_ids[i] >= 0);
    REQUIRE(c.cluster_ids[i] < c.count());
    ++members[static_cast<std::size_t>(c.cluster_ids[i])];
    // Ground clusters come first.
    CHECK((c.cluster_ids[i] < c.ground_clusters) == bool(scene.ground_mask[i]));
  }
  for (auto m : members) CHECK(m > 0);
}

TEST_CASE("all-noise partition becomes one cluster") {
  Scene scene;
  scene.points = {{0, 0, 0}, {50, 0, 0}, {0, 50, 0}};
  scene.ground_mask = {1, 1, 0};
  PipelineParams params;
  const auto c = cluster_scene(scene, params);
  CHECK(c.ground_fallback);
  CHECK(c.other_fallback);
  CHECK(c.ground_clusters == 1);
  CHECK(c.other_clusters == 1);
  CHECK(c.cluster_ids == std::vector<std::int32_t>{0, 0, 1});
}

// Flat ground, no label noise, objects lifted clear of the ground inlier
// band and spread out so that no sector is shadowed wholesale.
WorldSpec noise_free_world() {
  WorldSpec w;
  w.classes = standard_classes();
  const ClassTable table(w.classes);
  w.ground_class = *table.find("driveable_surface");
  w.ground_extent = 60;
  w.ground_noise_sigma = 0.0;
  w.trajectory = {RigidTransform::translation(0, 0, 1.8), RigidTransform::translation(2, 0, 1.8),
                  RigidTransform::translation(4, 0, 1.8)};
  w.lidar = {32, 1024, 10.0, -30.0, 1.0, 50.0};
  w.cameras = standard_rig(RigLayout::Full, 200, 150);
  auto add = [&](const char* cls, std::uint16_t inst, ShapeKind shape, double x, double y, double h, double l,
                 double wd) {
    ObjectSpec o;
    o.shape = shape;
    o.semantic = *table.find(cls);
    o.instance = InstanceId{inst};
    o.x = x;
    o.y = y;
    o.base_z = 0.4;
    o.height = h;
    o.length = l;
    o.width = wd;
    o.radius = 0.5 * wd;
    w.objects.push_back(o);
  };
  add("car", 1, ShapeKind::Box, 14, 6, 1.5, 4.5, 1.9);
  add("car", 2, ShapeKind::Box, -12, -7, 1.5, 4.5, 1.9);
  add("pedestrian", 1, ShapeKind::Cylinder, 6, -12, 1.4, 0.6, 0.6);
  add("construction_vehicle", 1, ShapeKind::Box, -10, 14, 2.5, 6, 2.5);
  add("manmade", 0, ShapeKind::Box, 25, -20, 6, 8, 5);
  add("vegetation", 0, ShapeKind::Cylinder, -22, -2, 4, 1.2, 1.2);
  return w;
}

TEST_CASE("refinement of ground-truth labels is a fixed point") {
  const auto d = generate_world(noise_free_world(), 3);
  const auto result = refine_scene(d.scans, d.gt_labels, d.poses, PipelineParams{}, d.classes);
  std::size_t total = 0, same = 0;
  for (std::size_t s = 0; s < d.scans.size(); ++s)
    for (std::size_t i = 0; i < d.scans[s].size(); ++i) {
      ++total;
      same += result.refined[s].semantic[i] == d.gt_labels[s].semantic[i] &&
              result.refined[s].instance[i] == d.gt_labels[s].instance[i];
    }
  CHECK(same == total);
}

TEST_CASE("re-refining with the same clustering changes nothing") {
  const auto& d = dataset();
  const auto primal = primal_of(d, 0.2);
  PipelineParams params;
  const auto first = refine_scene(d.scans, primal, d.poses, params, d.classes);

  Scene scene = accumulate(d.scans, first.refined, d.poses);
  scene.ground_mask = first.ground_mask;
  const auto again = refine_with_clustering(d.scans, scene, first.clustering, params, d.classes);
  REQUIRE(again.size() == first.refined.size());
  for (std::size_t s = 0; s < again.size(); ++s) CHECK(again[s] == first.refined[s]);
}

TEST_CASE("refinement improves corrupted labels") {
  const auto& d = dataset();
  const auto primal = primal_of(d, 0.2);
  const auto result = refine_scene(d.scans, primal, d.poses, PipelineParams{}, d.classes);
  std::size_t objects = 0, before = 0, after = 0;
  for (std::size_t s = 0; s < d.scans.size(); ++s)
    for (std::size_t i = 0; i < d.scans[s].size(); ++i) {
      if (!d.classes.is_thing(d.gt_labels[s].semantic[i])) continue;
      ++objects;
      before += primal[s].semantic[i] == d.gt_labels[s].semantic[i];
      after += result.refined[s].semantic[i] == d.gt_labels[s].semantic[i];
    }
  CHECK(after > before);
  CHECK(double(after) / double(objects) >= 0.99);
}

TEST_CASE("dataset write and load") {
  const auto& d = dataset();
  const auto root = fresh_dir("ds");
  write_dataset(d, root);
  const auto ds = load_dataset(root, 2);
  CHECK(ds.classes == d.classes);
  CHECK(ds.scan_ids.size() == 3);
  CHECK(ds.cameras.size() == d.cameras.size());
  CHECK(ds.scenes == std::vector<std::vector<std::size_t>>{{0, 1}, {2}});
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(read_point_cloud(scan_path(ds, s)).points == d.scans[s].points);
    CHECK(read_labels(label_path(root / "labels_gt", ds.scan_ids[s]), ds.classes) == d.gt_labels[s]);
    CHECK(read_label_image(image_path(ds, s, 1), ds.classes) == d.label_images[s][1]);
  }

  write_file_text(root / "scenes.txt", ds.scan_ids[2] + "\n" + ds.scan_ids[0] + " " + ds.scan_ids[1] + "\n");
  const auto explicit_scenes = load_dataset(root, 40);
  CHECK(explicit_scenes.scenes == std::vector<std::vector<std::size_t>>{{2}, {0, 1}});
  write_file_text(root / "scenes.txt", ds.scan_ids[0] + " missing\n");
  CHECK_THROWS_AS(load_dataset(root, 40), FormatError);
  write_file_text(root / "scenes.txt", ds.scan_ids[0] + "\n");
  CHECK_THROWS_AS(load_dataset(root, 40), FormatError);
  fs::remove(root / "scenes.txt");
  CHECK_THROWS_AS(load_dataset(fresh_dir("empty"), 40), IoError);
}

TEST_CASE("scene windows") {
  CHECK(window_scenes(5, 2) == std::vector<std::vector<std::size_t>>{{0, 1}, {2, 3}, {4}});
  CHECK(window_scenes(3, 40) == std::vector<std::vector<std::size_t>>{{0, 1, 2}});
}
