#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "panoref/core.hpp"
#include "panoref/kdtree.hpp"

namespace panoref {

inline constexpr std::int32_t kNoise = -1;

enum class ClusterSelection { ExcessOfMass, Leaf };

// Kd is Boruvka over the kd-tree; Dense is O(n^2) Prim. Both return the same
// tree because edges are totally ordered (see edge_less). Auto picks Dense up
// to kDenseMstLimit points.
enum class MstAlgorithm { Auto, Dense, KdTree };
inline constexpr std::size_t kDenseMstLimit = 2000;

struct ClusterParams {
  std::size_t min_cluster_size{5};
  std::optional<std::size_t> min_samples;  // defaults to min_cluster_size
  ClusterSelection selection{ClusterSelection::ExcessOfMass};
  MstAlgorithm mst{MstAlgorithm::Auto};

  std::size_t effective_min_samples() const { return min_samples.value_or(min_cluster_size); }
  void validate() const;
};

struct Clustering {
  std::vector<std::int32_t> cluster_id;  // kNoise or [0, count)
  std::int32_t count{0};

  std::size_t size() const { return cluster_id.size(); }
  std::size_t noise_count() const;
  // Throws InvariantViolation when an id is out of range or a cluster is empty.
  void validate() const;
};

// Mutual-reachability MST edge, weight stored squared.
struct MstEdge {
  std::uint32_t a;
  std::uint32_t b;
  double weight_sq;
  double weight() const { return std::sqrt(weight_sq); }
  friend bool operator==(const MstEdge&, const MstEdge&) = default;
};

// Strict total order on edges: (weight, min endpoint, max endpoint).
bool edge_less(const MstEdge& x, const MstEdge& y);

// Squared distance to the min_samples-th nearest neighbor, counting the point
// itself (the farthest point when there are fewer).
std::vector<double> core_distances_sq(const KdTree& tree, std::size_t min_samples);

std::vector<MstEdge> mst_dense(std::span<const Point3> points, std::span<const double> core_sq);
std::vector<MstEdge> mst_kdtree(const KdTree& tree, std::span<const double> core_sq);

// Condensed cluster hierarchy. Cluster 0 is the root; a child cluster always
// has a larger id than its parent.
struct CondensedTree {
  struct Entry {
    std::uint32_t parent;  // cluster id
    std::uint32_t child;   // point index or cluster id
    bool child_is_cluster;
    double lambda;  // 1 / distance at which the child leaves the parent
    std::uint32_t child_size;
  };
  std::vector<Entry> entries;
  std::size_t num_points{0};
  std::size_t num_clusters{1};
};

// 1 / distance with distances below 1e-12 clamped.
double lambda_of(double distance);

CondensedTree condense_tree(std::span<const MstEdge> mst, std::size_t num_points,
                            std::size_t min_cluster_size);
std::vector<double> cluster_stability(const CondensedTree& tree);
// Selects clusters (root excluded) and labels points; clusters are numbered
// in increasing condensed-tree id.
Clustering extract_clusters(const CondensedTree& tree, ClusterSelection selection);

Clustering hdbscan(std::span<const Point3> points, const ClusterParams& params);

// Each noise point takes the majority cluster among its k nearest non-noise
// points (ties go to the nearest of the tied neighbors). Throws NoClusters if
// every point is noise.
Clustering reassign_noise(std::span<const Point3> points, const Clustering& clustering, std::size_t k);

}  // namespace panoref
