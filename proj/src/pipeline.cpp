#include "panoref/pipeline.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "panoref/errors.hpp"

namespace panoref {

namespace fs = std::filesystem;

void PipelineParams::validate() const {
  if (!(min_depth > 0.0)) throw ConfigError("projection min depth must be positive");
  ground.validate();
  cluster.validate();
  if (noise_k < 1) throw ConfigError("noise_k must be >= 1");
  refine.validate();
  if (!(instance_fallback_radius > 0.0)) throw ConfigError("instance fallback radius must be positive");
}

namespace {

struct PartitionResult {
  std::vector<std::int32_t> ids;
  std::int32_t count{0};
  bool fallback{false};
  std::size_t noise{0};
};

PartitionResult cluster_partition(const std::vector<Point3>& points, const PipelineParams& params) {
  PartitionResult out;
  if (points.empty()) return out;
  const Clustering c = hdbscan(points, params.cluster);
  out.noise = c.noise_count();
  if (c.count == 0) {
    out.ids.assign(points.size(), 0);
    out.count = 1;
    out.fallback = true;
    return out;
  }
  const Clustering full = reassign_noise(points, c, params.noise_k);
  out.ids = full.cluster_id;
  out.count = full.count;
  return out;
}

}  // namespace

SceneClustering cluster_scene(const Scene& scene, const PipelineParams& params) {
  if (scene.ground_mask.size() != scene.size()) throw InvariantViolation("scene has no ground mask");
  std::vector<Point3> ground, other;
  for (std::size_t i = 0; i < scene.size(); ++i)
    (scene.ground_mask[i] ? ground : other).push_back(scene.points[i]);
  const PartitionResult g = cluster_partition(ground, params);
  const PartitionResult o = cluster_partition(other, params);
  SceneClustering out;
  out.cluster_ids = merge_partitions(scene.ground_mask, g.ids, g.count, o.ids);
  out.ground_clusters = g.count;
  out.other_clusters = o.count;
  out.ground_fallback = g.fallback;
  out.other_fallback = o.fallback;
  out.ground_noise = g.noise;
  out.other_noise = o.noise;
  return out;
}

std::vector<PanopticLabels> refine_with_clustering(std::span<const PointCloud> scans, const Scene& scene,
                                                   const SceneClustering& clustering,
                                                   const PipelineParams& params, const ClassTable& table) {
  if (scans.size() != scene.scan_count()) throw ConfigError("scan count does not match the scene");
  const auto y_star = refine_semantics(scene.labels.semantic, clustering.cluster_ids, params.refine, table);
  const auto per_scan = split_semantics(scene, y_star);
  const auto primal = split_scene(scene, scene.labels);
  std::vector<PanopticLabels> out;
  out.reserve(scans.size());
  for (std::size_t s = 0; s < scans.size(); ++s)
    out.push_back(correct_instances(scans[s].points, primal[s], per_scan[s], table,
                                    params.instance_fallback_radius));
  return out;
}

SceneResult refine_scene(std::span<const PointCloud> scans, std::span<const PanopticLabels> primal,
                         std::span<const RigidTransform> poses, const PipelineParams& params,
                         const ClassTable& table) {
  params.validate();
  Scene scene = accumulate(scans, primal, poses);
  scene.ground_mask = segment_ground(scene, params.ground);
  SceneResult out;
  out.clustering = cluster_scene(scene, params);
  out.refined = refine_with_clustering(scans, scene, out.clustering, params, table);
  out.ground_mask = std::move(scene.ground_mask);
  return out;
}

// ------------------------------------------------------------------- dataset

namespace {

std::vector<std::string> read_id_lines(const fs::path& path) {
  std::istringstream in(read_file_text(path));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream words(line);
    std::string id;
    if (words >> id) {
      std::string extra;
      if (words >> extra) throw FormatError(path.string() + ": one scan id per line expected");
      ids.push_back(id);
    }
  }
  return ids;
}

}  // namespace

std::vector<std::vector<std::size_t>> window_scenes(std::size_t scans, std::size_t window) {
  if (window == 0) throw ConfigError("scene window must be >= 1");
  std::vector<std::vector<std::size_t>> scenes;
  for (std::size_t begin = 0; begin < scans; begin += window) {
    std::vector<std::size_t> scene;
    for (std::size_t s = begin; s < std::min(scans, begin + window); ++s) scene.push_back(s);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

DatasetIndex load_dataset(const fs::path& root, std::size_t window) {
  DatasetIndex ds{root, read_class_table(root / "classes.json"), read_calibration(root / "calibration.txt"),
                  read_poses(root / "poses.txt"), read_id_lines(root / "scans.txt"), {}};
  if (ds.scan_ids.empty()) throw FormatError("scans.txt lists no scans");
  if (ds.poses.size() != ds.scan_ids.size())
    throw FormatError("poses.txt has " + std::to_string(ds.poses.size()) + " poses for " +
                      std::to_string(ds.scan_ids.size()) + " scans");
  if (ds.scan_ids.size() > 65535) throw FormatError("too many scans");
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < ds.scan_ids.size(); ++i)
    if (!by_id.emplace(ds.scan_ids[i], i).second) throw FormatError("duplicate scan id " + ds.scan_ids[i]);

  const fs::path scenes_file = root / "scenes.txt";
  if (!fs::exists(scenes_file)) {
    ds.scenes = window_scenes(ds.scan_ids.size(), window);
    return ds;
  }
  std::istringstream in(read_file_text(scenes_file));
  std::vector<std::uint8_t> used(ds.scan_ids.size(), 0);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream words(line);
    std::vector<std::size_t> scene;
    for (std::string id; words >> id;) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw FormatError("scenes.txt: unknown scan id " + id);
      if (used[it->second]++) throw FormatError("scenes.txt: scan " + id + " listed twice");
      scene.push_back(it->second);
    }
    if (!scene.empty()) ds.scenes.push_back(std::move(scene));
  }
  for (std::size_t i = 0; i < used.size(); ++i)
    if (!used[i]) throw FormatError("scenes.txt: scan " + ds.scan_ids[i] + " is in no scene");
  return ds;
}

fs::path scan_path(const DatasetIndex& ds, std::size_t scan) {
  return ds.root / "lidar" / (ds.scan_ids.at(scan) + ".bin");
}

fs::path image_path(const DatasetIndex& ds, std::size_t scan, std::size_t camera) {
  return ds.root / "images" / ds.scan_ids.at(scan) / (std::to_string(camera) + ".png");
}

fs::path label_path(const fs::path& dir, const std::string& scan_id) { return dir / (scan_id + ".label"); }

void write_dataset(const SyntheticDataset& data, const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root / "lidar", ec);
  fs::create_directories(root / "images", ec);
  fs::create_directories(root / "labels_gt", ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  write_class_table(data.classes, root / "classes.json");
  write_calibration(data.cameras, root / "calibration.txt");
  write_poses(data.poses, root / "poses.txt");
  std::string ids;
  for (std::size_t s = 0; s < data.scans.size(); ++s) {
    const auto& scan = data.scans[s];
    ids += scan.scan_id + "\n";
    write_point_cloud(scan, root / "lidar" / (scan.scan_id + ".bin"));
    write_labels(data.gt_labels[s], label_path(root / "labels_gt", scan.scan_id));
    const fs::path dir = root / "images" / scan.scan_id;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t c = 0; c < data.label_images[s].size(); ++c)
      write_label_image(data.label_images[s][c], dir / (std::to_string(c) + ".png"));
  }
  write_file_text(root / "scans.txt", ids);
}

}  // namespace panoref
