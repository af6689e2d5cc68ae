#include "panoref/refine.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

#include "panoref/errors.hpp"
#include "panoref/hdbscan.hpp"
#include "panoref/kdtree.hpp"

namespace panoref {

void RefineConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must be in (0, 1]");
  if (!(tau_void > 0.0 && tau_void <= 1.0)) throw ConfigError("tau_void must be in (0, 1]");
}

namespace {

SemanticId vote_counts(const std::vector<std::size_t>& counts, std::size_t total,
                       const RefineConfig& cfg, const ClassTable& table) {
  const double n = static_cast<double>(total);
  // counts[0] is void; scanning upward keeps the lowest id on ties.
  std::size_t top = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[top]) top = c;
  if (top == 0 && static_cast<double>(counts[0]) / n > cfg.tau_void) return kVoid;

  std::size_t rare = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    const SemanticId id{static_cast<std::uint16_t>(c)};
    if (!table.is_rare(id) || !(static_cast<double>(counts[c]) / n > cfg.tau)) continue;
    if (rare == 0 || counts[c] > counts[rare]) rare = c;
  }
  if (rare != 0) return SemanticId{static_cast<std::uint16_t>(rare)};

  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > 0 && (best == 0 || counts[c] > counts[best])) best = c;
  return SemanticId{static_cast<std::uint16_t>(best)};
}

}  // namespace

SemanticId vote_cluster(std::span<const SemanticId> labels, const RefineConfig& cfg,
                        const ClassTable& table) {
  if (labels.empty()) throw InvariantViolation("vote_cluster needs at least one label");
  std::vector<std::size_t> counts(table.size() + 1, 0);
  for (auto s : labels) {
    if (!table.contains(s)) throw InvariantViolation("label outside the class table");
    ++counts[s.value];
  }
  return vote_counts(counts, labels.size(), cfg, table);
}

std::vector<SemanticId> refine_semantics(std::span<const SemanticId> primal,
                                         std::span<const std::int32_t> cluster_ids,
                                         const RefineConfig& cfg, const ClassTable& table) {
  cfg.validate();
  if (primal.size() != cluster_ids.size())
    throw LengthMismatch("refine_semantics: labels and cluster ids differ in length");
  std::int32_t count = 0;
  for (auto id : cluster_ids) {
    if (id < 0) throw CoverageError("refine_semantics: point without a cluster");
    count = std::max(count, id + 1);
  }
  const std::size_t classes = table.size() + 1;
  std::vector<std::size_t> counts(static_cast<std::size_t>(count) * classes, 0);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(count), 0);
  for (std::size_t i = 0; i < primal.size(); ++i) {
    if (!table.contains(primal[i])) throw InvariantViolation("label outside the class table");
    ++counts[static_cast<std::size_t>(cluster_ids[i]) * classes + primal[i].value];
    ++sizes[static_cast<std::size_t>(cluster_ids[i])];
  }
  std::vector<SemanticId> vote(static_cast<std::size_t>(count), kVoid);
  std::vector<std::size_t> local(classes);
  for (std::size_t c = 0; c < vote.size(); ++c) {
    if (sizes[c] == 0) continue;
    std::copy_n(counts.begin() + static_cast<std::ptrdiff_t>(c * classes), classes, local.begin());
    vote[c] = vote_counts(local, sizes[c], cfg, table);
  }
  std::vector<SemanticId> out(primal.size());
  for (std::size_t i = 0; i < primal.size(); ++i) out[i] = vote[static_cast<std::size_t>(cluster_ids[i])];
  return out;
}

std::vector<std::int32_t> merge_partitions(std::span<const std::uint8_t> ground_mask,
                                           std::span<const std::int32_t> ground_ids,
                                           std::int32_t ground_count,
                                           std::span<const std::int32_t> other_ids) {
  std::vector<std::int32_t> out(ground_mask.size(), kNoise);
  std::size_t g = 0, o = 0;
  for (std::size_t i = 0; i < ground_mask.size(); ++i) {
    if (ground_mask[i]) {
      if (g >= ground_ids.size()) throw LengthMismatch("ground clustering shorter than its partition");
      out[i] = ground_ids[g++];
    } else {
      if (o >= other_ids.size()) throw LengthMismatch("non-ground clustering shorter than its partition");
      const auto id = other_ids[o++];
      out[i] = id < 0 ? id : id + ground_count;
    }
  }
  if (g != ground_ids.size() || o != other_ids.size())
    throw LengthMismatch("partition clusterings longer than their partitions");
  return out;
}

PanopticLabels correct_instances(std::span<const Point3> points, const PanopticLabels& primal,
                                 std::span<const SemanticId> refined, const ClassTable& table,
                                 double fallback_radius) {
  const std::size_t n = points.size();
  if (primal.size() != n || primal.instance.size() != n || refined.size() != n)
    throw LengthMismatch("correct_instances: arrays are not parallel");

  PanopticLabels out;
  out.semantic.assign(refined.begin(), refined.end());
  out.instance.assign(n, kNoInstance);

  std::uint32_t max_id = 0;
  // Unresolved thing points grouped by class.
  std::map<std::uint16_t, std::vector<std::uint32_t>> unknown;
  std::map<std::uint16_t, std::vector<std::uint32_t>> donors;
  for (std::size_t i = 0; i < n; ++i) {
    if (!table.is_thing(refined[i])) continue;
    const InstanceId z = primal.instance[i];
    const bool valid = primal.semantic[i] == refined[i] && z != kNoInstance && z != kUnknownInstance;
    if (valid) {
      out.instance[i] = z;
      max_id = std::max<std::uint32_t>(max_id, z.value);
      donors[refined[i].value].push_back(static_cast<std::uint32_t>(i));
    } else {
      out.instance[i] = kUnknownInstance;
      unknown[refined[i].value].push_back(static_cast<std::uint32_t>(i));
    }
  }
  if (max_id > kMaxInstanceId) throw InstanceOverflow("primal instance id above 999");

  for (const auto& [cls, pending] : unknown) {
    const auto donor_it = donors.find(cls);
    if (donor_it != donors.end()) {
      std::vector<Point3> donor_points;
      donor_points.reserve(donor_it->second.size());
      for (auto d : donor_it->second) donor_points.push_back(points[d]);
      const KdTree tree(donor_points);
      for (auto i : pending) {
        const auto nn = tree.nearest(points[i]);
        out.instance[i] = out.instance[donor_it->second[nn->index]];
      }
      continue;
    }

    // No donor of this class in the scan: radius-connected components.
    std::vector<Point3> group_points;
    group_points.reserve(pending.size());
    for (auto i : pending) group_points.push_back(points[i]);
    const KdTree tree(group_points);
    std::vector<std::uint32_t> parent(pending.size());
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
      while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
      }
      return x;
    };
    for (std::uint32_t a = 0; a < pending.size(); ++a)
      for (const auto& nb : tree.radius_search(group_points[a], fallback_radius)) {
        auto ra = find(a), rb = find(nb.index);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    std::map<std::uint32_t, std::uint16_t> fresh;
    for (std::uint32_t a = 0; a < pending.size(); ++a) {
      const auto root = find(a);
      auto it = fresh.find(root);
      if (it == fresh.end()) {
        if (max_id + 1 > kMaxInstanceId)
          throw InstanceOverflow("more than 999 instances in one scan");
        it = fresh.emplace(root, static_cast<std::uint16_t>(++max_id)).first;
      }
      out.instance[pending[a]] = InstanceId{it->second};
    }
  }
  return out;
}

}  // namespace panoref
