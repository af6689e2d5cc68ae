#include "panoref/hdbscan.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "panoref/errors.hpp"

namespace panoref {

void ClusterParams::validate() const {
  if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be >= 2");
  if (effective_min_samples() < 1) throw ConfigError("min_samples must be >= 1");
}

std::size_t Clustering::noise_count() const {
  return static_cast<std::size_t>(std::count(cluster_id.begin(), cluster_id.end(), kNoise));
}

void Clustering::validate() const {
  if (count < 0) throw InvariantViolation("negative cluster count");
  std::vector<std::size_t> members(static_cast<std::size_t>(count), 0);
  for (auto id : cluster_id) {
    if (id == kNoise) continue;
    if (id < 0 || id >= count) throw InvariantViolation("cluster id out of range");
    ++members[static_cast<std::size_t>(id)];
  }
  for (auto m : members)
    if (m == 0) throw InvariantViolation("empty cluster id");
}

bool edge_less(const MstEdge& x, const MstEdge& y) {
  if (x.weight_sq != y.weight_sq) return x.weight_sq < y.weight_sq;
  const auto xl = std::min(x.a, x.b), yl = std::min(y.a, y.b);
  if (xl != yl) return xl < yl;
  return std::max(x.a, x.b) < std::max(y.a, y.b);
}

namespace {

// Edges are stored with a < b so that both MST builders agree exactly.
MstEdge make_edge(std::uint32_t a, std::uint32_t b, double weight_sq) {
  return a < b ? MstEdge{a, b, weight_sq} : MstEdge{b, a, weight_sq};
}

}  // namespace

double lambda_of(double distance) { return 1.0 / std::max(distance, 1e-12); }

namespace {

// Core distances plus, per point, every point within its core distance
// (boundary ties included). Used by the MST to settle points whose lightest
// edge sits exactly at the core-distance lower bound.
struct CoreData {
  std::vector<double> core;
  std::vector<std::uint32_t> offset;
  std::vector<std::uint32_t> neighbors;
};

CoreData core_data(const KdTree& tree, std::size_t min_samples) {
  const auto pts = tree.points();
  const std::size_t n = pts.size();
  const std::size_t k = std::min(std::max<std::size_t>(min_samples, 1), n);
  CoreData out;
  out.core.resize(n);
  out.offset.reserve(n + 1);
  out.offset.push_back(0);
  out.neighbors.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    auto nn = tree.knn(pts[i], std::min(k + 1, n));
    const double core = nn[k - 1].distance_sq;
    if (nn.size() > k && nn[k].distance_sq == core)
      nn = tree.radius_search_sq(pts[i], core);
    else
      nn.resize(k);
    out.core[i] = core;
    for (const auto& nb : nn)
      if (nb.index != i) out.neighbors.push_back(nb.index);
    out.offset.push_back(static_cast<std::uint32_t>(out.neighbors.size()));
  }
  return out;
}

CoreData neighborhoods_for(const KdTree& tree, std::span<const double> core) {
  const auto pts = tree.points();
  CoreData out;
  out.core.assign(core.begin(), core.end());
  out.offset.push_back(0);
  for (std::uint32_t i = 0; i < pts.size(); ++i) {
    for (const auto& nb : tree.radius_search_sq(pts[i], core[i]))
      if (nb.index != i) out.neighbors.push_back(nb.index);
    out.offset.push_back(static_cast<std::uint32_t>(out.neighbors.size()));
  }
  return out;
}

}  // namespace

std::vector<double> core_distances_sq(const KdTree& tree, std::size_t min_samples) {
  return core_data(tree, min_samples).core;
}

namespace {

double mutual_reachability_sq(std::span<const Point3> pts, std::span<const double> core,
                              std::uint32_t a, std::uint32_t b) {
  return std::max({core[a], core[b], squared_distance(pts[a], pts[b])});
}

constexpr MstEdge kNoEdge{std::numeric_limits<std::uint32_t>::max(),
                          std::numeric_limits<std::uint32_t>::max(),
                          std::numeric_limits<double>::infinity()};

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (a < b) std::swap(a, b);
    parent[a] = b;
    return true;
  }
};

}  // namespace

std::vector<MstEdge> mst_dense(std::span<const Point3> pts, std::span<const double> core) {
  const std::size_t n = pts.size();
  std::vector<MstEdge> edges;
  if (n < 2) return edges;
  edges.reserve(n - 1);
  std::vector<MstEdge> best(n, kNoEdge);
  std::vector<std::uint8_t> in_tree(n, 0);
  std::uint32_t current = 0;
  in_tree[0] = 1;
  for (std::size_t step = 1; step < n; ++step) {
    std::uint32_t next = 0;
    bool found = false;
    for (std::uint32_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const MstEdge cand = make_edge(current, v, mutual_reachability_sq(pts, core, current, v));
      if (edge_less(cand, best[v])) best[v] = cand;
      if (!found || edge_less(best[v], best[next])) {
        next = v;
        found = true;
      }
    }
    in_tree[next] = 1;
    edges.push_back(best[next]);
    current = next;
  }
  return edges;
}

namespace {

std::vector<MstEdge> boruvka(const KdTree& tree, const CoreData& data) {
  const auto pts = tree.points();
  const std::span<const double> core = data.core;
  const std::size_t n = pts.size();
  std::vector<MstEdge> edges;
  if (n < 2) return edges;
  edges.reserve(n - 1);

  const auto& nodes = tree.nodes();
  const auto order = tree.order();
  std::vector<double> node_min_core(nodes.size());
  for (std::size_t id = nodes.size(); id-- > 0;) {
    const auto& node = nodes[id];
    if (node.leaf()) {
      double m = std::numeric_limits<double>::infinity();
      for (std::uint32_t i = node.begin; i < node.end; ++i) m = std::min(m, core[order[i]]);
      node_min_core[id] = m;
    } else {
      node_min_core[id] = std::min(node_min_core[node.left], node_min_core[node.right]);
    }
  }

  UnionFind uf(n);
  std::vector<std::uint32_t> comp(n);
  std::vector<std::int64_t> node_comp(nodes.size());
  std::vector<MstEdge> best(n);
  std::size_t components = n;


  while (components > 1) {
    for (std::uint32_t i = 0; i < n; ++i) comp[i] = uf.find(i);
    for (std::size_t id = nodes.size(); id-- > 0;) {
      const auto& node = nodes[id];
      if (node.leaf()) {
        std::int64_t c = comp[order[node.begin]];
        for (std::uint32_t i = node.begin + 1; i < node.end && c >= 0; ++i)
          if (comp[order[i]] != c) c = -1;
        node_comp[id] = c;
      } else {
        const auto l = node_comp[node.left];
        node_comp[id] = (l >= 0 && l == node_comp[node.right]) ? l : -1;
      }
    }
    std::fill(best.begin(), best.end(), kNoEdge);

    for (std::uint32_t a = 0; a < n; ++a) {
      const std::uint32_t ca = comp[a];
      MstEdge& target = best[ca];
      if (core[a] > target.weight_sq) continue;

      // Every edge from a weighs at least core[a]; the ones that weigh exactly
      // that all lie in a's core neighborhood.
      bool settled = false;
      for (std::uint32_t j = data.offset[a]; j < data.offset[a + 1]; ++j) {
        const std::uint32_t b = data.neighbors[j];
        if (comp[b] == ca || core[b] > core[a]) continue;
        const MstEdge cand = make_edge(a, b, mutual_reachability_sq(pts, core, a, b));
        if (edge_less(cand, target)) target = cand;
        settled = true;
      }
      if (settled) continue;

      const Point3& pa = pts[a];

      auto visit = [&](auto&& self, std::int32_t id) -> void {
        const auto& node = nodes[id];
        if (node_comp[id] == ca) return;
        const double bound = std::max({core[a], node_min_core[id], KdTree::box_distance_sq(node, pa)});
        if (bound > target.weight_sq) return;
        if (node.leaf()) {
          for (std::uint32_t i = node.begin; i < node.end; ++i) {
            const std::uint32_t b = order[i];
            if (comp[b] == ca) continue;
            const MstEdge cand = make_edge(a, b, mutual_reachability_sq(pts, core, a, b));
            if (edge_less(cand, target)) target = cand;
          }
          return;
        }
        const double dl = KdTree::box_distance_sq(nodes[node.left], pa);
        const double dr = KdTree::box_distance_sq(nodes[node.right], pa);
        if (dl <= dr) {
          self(self, node.left);
          self(self, node.right);
        } else {
          self(self, node.right);
          self(self, node.left);
        }
      };
      visit(visit, 0);
    }

    for (std::uint32_t c = 0; c < n; ++c) {
      if (comp[c] != c || best[c].a == kNoEdge.a) continue;
      if (uf.unite(best[c].a, best[c].b)) {
        edges.push_back(best[c]);
        --components;
      }
    }
  }
  return edges;
}

}  // namespace

std::vector<MstEdge> mst_kdtree(const KdTree& tree, std::span<const double> core) {
  if (core.size() != tree.size()) throw InvariantViolation("core distance count does not match the tree");
  return boruvka(tree, neighborhoods_for(tree, core));
}

CondensedTree condense_tree(std::span<const MstEdge> mst, std::size_t n, std::size_t min_cluster_size) {
  CondensedTree out;
  out.num_points = n;
  out.num_clusters = 1;
  if (n < 2 || mst.size() + 1 != n) {
    for (std::uint32_t i = 0; i < n; ++i) out.entries.push_back({0, i, false, lambda_of(0.0), 1});
    if (n >= 2) throw InvariantViolation("spanning tree does not have n - 1 edges");
    return out;
  }

  // Single-linkage dendrogram: node n + k is the k-th merge in edge order.
  std::vector<MstEdge> sorted(mst.begin(), mst.end());
  std::sort(sorted.begin(), sorted.end(), edge_less);
  const std::size_t total = 2 * n - 1;
  std::vector<std::uint32_t> left(total, 0), right(total, 0), size(total, 1);
  std::vector<double> height(total, 0.0);
  {
    std::vector<std::uint32_t> uf(total);
    std::iota(uf.begin(), uf.end(), 0u);
    auto find = [&](std::uint32_t x) {
      std::uint32_t root = x;
      while (uf[root] != root) root = uf[root];
      while (uf[x] != root) {
        const auto next = uf[x];
        uf[x] = root;
        x = next;
      }
      return root;
    };
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      const auto node = static_cast<std::uint32_t>(n + k);
      const auto ra = find(sorted[k].a);
      const auto rb = find(sorted[k].b);
      left[node] = ra;
      right[node] = rb;
      height[node] = sorted[k].weight();
      size[node] = size[ra] + size[rb];
      uf[ra] = node;
      uf[rb] = node;
    }
  }

  const auto root = static_cast<std::uint32_t>(total - 1);
  std::vector<std::uint32_t> relabel(total, 0);
  std::vector<std::uint8_t> ignore(total, 0);
  std::vector<std::uint32_t> queue{root};
  std::vector<std::uint32_t> stack;

  auto drop_points = [&](std::uint32_t sub, std::uint32_t parent_cluster, double lambda) {
    stack.assign(1, sub);
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      ignore[x] = 1;
      if (x < n) {
        out.entries.push_back({parent_cluster, x, false, lambda, 1});
      } else {
        stack.push_back(right[x]);
        stack.push_back(left[x]);
      }
    }
  };

  for (std::size_t q = 0; q < queue.size(); ++q) {
    const auto node = queue[q];
    if (node < n || ignore[node]) continue;
    const auto l = left[node];
    const auto r = right[node];
    const double lambda = lambda_of(height[node]);
    const auto cluster = relabel[node];
    const bool l_big = size[l] >= min_cluster_size;
    const bool r_big = size[r] >= min_cluster_size;
    if (l_big && r_big) {
      for (auto child : {l, r}) {
        relabel[child] = static_cast<std::uint32_t>(out.num_clusters++);
        out.entries.push_back({cluster, relabel[child], true, lambda, size[child]});
        queue.push_back(child);
      }
    } else if (!l_big && !r_big) {
      drop_points(l, cluster, lambda);
      drop_points(r, cluster, lambda);
    } else {
      const auto keep = l_big ? l : r;
      const auto drop = l_big ? r : l;
      relabel[keep] = cluster;
      drop_points(drop, cluster, lambda);
      queue.push_back(keep);
    }
  }
  return out;
}

std::vector<double> cluster_stability(const CondensedTree& tree) {
  std::vector<double> birth(tree.num_clusters, 0.0);
  for (const auto& e : tree.entries)
    if (e.child_is_cluster) birth[e.child] = e.lambda;
  std::vector<double> stability(tree.num_clusters, 0.0);
  for (const auto& e : tree.entries)
    stability[e.parent] += (e.lambda - birth[e.parent]) * static_cast<double>(e.child_size);
  return stability;
}

Clustering extract_clusters(const CondensedTree& tree, ClusterSelection selection) {
  const std::size_t m = tree.num_clusters;
  std::vector<std::uint32_t> parent(m, 0);
  std::vector<std::vector<std::uint32_t>> children(m);
  for (const auto& e : tree.entries)
    if (e.child_is_cluster) {
      parent[e.child] = e.parent;
      children[e.parent].push_back(e.child);
    }

  std::vector<std::uint8_t> selected(m, 0);
  if (selection == ClusterSelection::Leaf) {
    for (std::size_t c = 1; c < m; ++c) selected[c] = children[c].empty();
  } else {
    auto stability = cluster_stability(tree);
    for (std::size_t c = 1; c < m; ++c) selected[c] = 1;
    for (std::size_t c = m; c-- > 1;) {
      double subtree = 0.0;
      for (auto ch : children[c]) subtree += stability[ch];
      if (subtree > stability[c]) {
        selected[c] = 0;
        stability[c] = subtree;
      } else {
        std::vector<std::uint32_t> stack(children[c].begin(), children[c].end());
        while (!stack.empty()) {
          const auto x = stack.back();
          stack.pop_back();
          selected[x] = 0;
          stack.insert(stack.end(), children[x].begin(), children[x].end());
        }
      }
    }
  }

  // Nearest selected ancestor-or-self; parents precede children.
  std::vector<std::int32_t> owner(m, kNoise);
  std::vector<std::int32_t> number(m, kNoise);
  std::int32_t count = 0;
  for (std::size_t c = 1; c < m; ++c) {
    if (selected[c]) {
      number[c] = count++;
      owner[c] = number[c];
    } else {
      owner[c] = owner[parent[c]];
    }
  }

  Clustering out;
  out.cluster_id.assign(tree.num_points, kNoise);
  out.count = count;
  for (const auto& e : tree.entries)
    if (!e.child_is_cluster) out.cluster_id[e.child] = owner[e.parent];
  return out;
}

Clustering hdbscan(std::span<const Point3> points, const ClusterParams& params) {
  params.validate();
  Clustering out;
  out.cluster_id.assign(points.size(), kNoise);
  if (points.size() < params.min_cluster_size || points.size() < 2) return out;

  const KdTree tree(points);
  const CoreData data = core_data(tree, params.effective_min_samples());
  const bool dense = params.mst == MstAlgorithm::Dense ||
                     (params.mst == MstAlgorithm::Auto && points.size() <= kDenseMstLimit);
  const auto mst = dense ? mst_dense(points, data.core) : boruvka(tree, data);
  const auto condensed = condense_tree(mst, points.size(), params.min_cluster_size);
  return extract_clusters(condensed, params.selection);
}

Clustering reassign_noise(std::span<const Point3> points, const Clustering& clustering, std::size_t k) {
  if (clustering.size() != points.size()) throw LengthMismatch("clustering is not parallel to points");
  if (k == 0) throw ConfigError("noise reassignment needs k >= 1");
  std::vector<Point3> members;
  std::vector<std::int32_t> member_id;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (clustering.cluster_id[i] != kNoise) {
      members.push_back(points[i]);
      member_id.push_back(clustering.cluster_id[i]);
    }
  if (members.empty()) throw NoClusters("every point is noise");

  Clustering out = clustering;
  if (members.size() == points.size()) return out;
  const KdTree tree(members);
  std::vector<std::size_t> votes(static_cast<std::size_t>(clustering.count), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (clustering.cluster_id[i] != kNoise) continue;
    const auto nn = tree.knn(points[i], k);
    std::size_t top = 0;
    for (const auto& nb : nn) top = std::max(top, ++votes[static_cast<std::size_t>(member_id[nb.index])]);
    for (const auto& nb : nn)
      if (votes[static_cast<std::size_t>(member_id[nb.index])] == top) {
        out.cluster_id[i] = member_id[nb.index];
        break;
      }
    for (const auto& nb : nn) votes[static_cast<std::size_t>(member_id[nb.index])] = 0;
  }
  return out;
}

}  // namespace panoref
