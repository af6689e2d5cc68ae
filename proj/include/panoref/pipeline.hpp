#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "panoref/accumulate.hpp"
#include "panoref/ground.hpp"
#include "panoref/hdbscan.hpp"
#include "panoref/io.hpp"
#include "panoref/projection.hpp"
#include "panoref/refine.hpp"
#include "panoref/synth.hpp"

namespace panoref {

struct PipelineParams {
  double min_depth{kDefaultMinDepth};
  GroundParams ground;
  ClusterParams cluster;
  std::size_t noise_k{5};
  RefineConfig refine;
  double instance_fallback_radius{1.0};

  void validate() const;
};

// Scene-wide cluster ids after noise reassignment: ground clusters come first,
// then non-ground ones.
struct SceneClustering {
  std::vector<std::int32_t> cluster_ids;
  std::int32_t ground_clusters{0};
  std::int32_t other_clusters{0};
  // Partition that came out all noise and was kept as one cluster.
  bool ground_fallback{false};
  bool other_fallback{false};
  std::size_t ground_noise{0};  // noise points before reassignment
  std::size_t other_noise{0};

  std::int32_t count() const { return ground_clusters + other_clusters; }
};

// Clusters both partitions of a scene whose ground_mask is set.
SceneClustering cluster_scene(const Scene& scene, const PipelineParams& params);

struct SceneResult {
  std::vector<PanopticLabels> refined;  // per scan
  std::vector<std::uint8_t> ground_mask;
  SceneClustering clustering;
};

// Steps after clustering: vote, split per scan, correct instances.
std::vector<PanopticLabels> refine_with_clustering(std::span<const PointCloud> scans, const Scene& scene,
                                                   const SceneClustering& clustering,
                                                   const PipelineParams& params, const ClassTable& table);

// Full refinement of one scene: accumulate, ground, cluster, vote, correct.
SceneResult refine_scene(std::span<const PointCloud> scans, std::span<const PanopticLabels> primal,
                         std::span<const RigidTransform> poses, const PipelineParams& params,
                         const ClassTable& table);

// On-disk dataset:
//   classes.json  calibration.txt  poses.txt  scans.txt  [scenes.txt]
//   lidar/<scan>.bin  images/<scan>/<camera>.png  <label dir>/<scan>.label
struct DatasetIndex {
  std::filesystem::path root;
  ClassTable classes;
  std::vector<CameraModel> cameras;
  std::vector<RigidTransform> poses;
  std::vector<std::string> scan_ids;
  std::vector<std::vector<std::size_t>> scenes;  // scan indices per scene, in order
};

// Reads the index files. Scenes come from scenes.txt when present (each line
// lists scan ids), else from consecutive chunks of `window` scans.
DatasetIndex load_dataset(const std::filesystem::path& root, std::size_t window);
std::vector<std::vector<std::size_t>> window_scenes(std::size_t scans, std::size_t window);

std::filesystem::path scan_path(const DatasetIndex& ds, std::size_t scan);
std::filesystem::path image_path(const DatasetIndex& ds, std::size_t scan, std::size_t camera);
std::filesystem::path label_path(const std::filesystem::path& dir, const std::string& scan_id);

// Writes everything but label directories other than labels_gt.
void write_dataset(const SyntheticDataset& data, const std::filesystem::path& root);

}  // namespace panoref
