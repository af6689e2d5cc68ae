#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "panoref/core.hpp"
#include "panoref/io.hpp"

namespace panoref {

struct RefineConfig {
  double tau{0.3};       // rare-class frequency threshold
  double tau_void{0.5};  // void-dominance threshold
  void validate() const;
};

// In-cluster vote with frequencies over all labels (void included):
//   1. void if void is the most frequent label and freq(void) > tau_void;
//   2. otherwise the most frequent rare class with freq > tau, if any;
//   3. otherwise the most frequent non-void class (void if all void).
// Ties go to the lowest class id.
SemanticId vote_cluster(std::span<const SemanticId> labels, const RefineConfig& cfg,
                        const ClassTable& table);

// y*: every point takes the vote of its cluster. Throws CoverageError if a
// point has no cluster (negative id).
std::vector<SemanticId> refine_semantics(std::span<const SemanticId> primal,
                                         std::span<const std::int32_t> cluster_ids,
                                         const RefineConfig& cfg, const ClassTable& table);

// Concatenates per-partition clusterings into scene-wide cluster ids: ground
// points take their ground cluster, the rest are offset past them. Each
// clustering is indexed in partition order (scene order filtered by mask).
std::vector<std::int32_t> merge_partitions(std::span<const std::uint8_t> ground_mask,
                                           std::span<const std::int32_t> ground_ids,
                                           std::int32_t ground_count,
                                           std::span<const std::int32_t> other_ids);

// Instance correction on one scan. Stuff and void points get instance 0.
// Thing points keep their primal instance when the class is unchanged; the
// rest adopt the instance of the nearest same-class point that kept a valid
// id, and classes with no such donor are split into radius-connected groups
// that each receive a fresh id. Throws InstanceOverflow past 999 ids.
PanopticLabels correct_instances(std::span<const Point3> scan_points, const PanopticLabels& primal,
                                 std::span<const SemanticId> refined, const ClassTable& table,
                                 double fallback_radius = 1.0);

}  // namespace panoref
