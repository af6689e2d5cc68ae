#include "panoref/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <limits>

#include "panoref/errors.hpp"

namespace panoref {

namespace {

float coord(const Point3& p, int axis) { return axis == 0 ? p.x : (axis == 1 ? p.y : p.z); }

bool closer(const KdTree::Neighbor& a, const KdTree::Neighbor& b) {
  return a.distance_sq < b.distance_sq || (a.distance_sq == b.distance_sq && a.index < b.index);
}

}  // namespace

KdTree::KdTree(std::span<const Point3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), order_(points.size()) {
  if (points_.empty()) throw InvariantViolation("kd-tree needs at least one point");
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / std::max<std::size_t>(leaf_size, 1) + 1);
  build(0, static_cast<std::uint32_t>(points_.size()), std::max<std::size_t>(leaf_size, 1));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, std::size_t leaf_size) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({});
  Node node{};
  node.begin = begin;
  node.end = end;
  node.lo = {coord(points_[order_[begin]], 0), coord(points_[order_[begin]], 1),
             coord(points_[order_[begin]], 2)};
  node.hi = node.lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    const Point3& p = points_[order_[i]];
    for (int a = 0; a < 3; ++a) {
      node.lo[a] = std::min(node.lo[a], coord(p, a));
      node.hi[a] = std::max(node.hi[a], coord(p, a));
    }
  }
  if (end - begin > leaf_size) {
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (node.hi[a] - node.lo[a] > node.hi[axis] - node.lo[axis]) axis = a;
    if (node.hi[axis] > node.lo[axis]) {
      const std::uint32_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                       [&](std::uint32_t a, std::uint32_t b) {
                         const float ca = coord(points_[a], axis);
                         const float cb = coord(points_[b], axis);
                         return ca < cb || (ca == cb && a < b);
                       });
      node.left = build(begin, mid, leaf_size);
      node.right = build(mid, end, leaf_size);
    }
  }
  nodes_[id] = node;
  return id;
}

double KdTree::box_distance_sq(const Node& node, const Point3& q) {
  double d = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double c = coord(q, a);
    double gap = 0.0;
    if (c < node.lo[a])
      gap = static_cast<double>(node.lo[a]) - c;
    else if (c > node.hi[a])
      gap = c - static_cast<double>(node.hi[a]);
    d += gap * gap;
  }
  return d;
}

std::vector<KdTree::Neighbor> KdTree::knn(const Point3& query, std::size_t k) const {
  std::vector<Neighbor> best;
  if (k == 0) return best;
  k = std::min(k, points_.size());
  best.reserve(k + 1);
  auto worst = [&] {
    return best.size() < k ? std::numeric_limits<double>::infinity() : best.back().distance_sq;
  };

  struct Pending {
    std::int32_t id;
    double bound;
  };
  std::vector<Pending> stack;
  stack.reserve(64);
  stack.push_back({0, box_distance_sq(nodes_[0], query)});
  while (!stack.empty()) {
    const Pending top = stack.back();
    stack.pop_back();
    if (top.bound > worst()) continue;
    const Node& node = nodes_[top.id];
    if (node.leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const Neighbor cand{order_[i], squared_distance(query, points_[order_[i]])};
        if (best.size() == k && !closer(cand, best.back())) continue;
        best.insert(std::upper_bound(best.begin(), best.end(), cand, closer), cand);
        if (best.size() > k) best.pop_back();
      }
      continue;
    }
    const double dl = box_distance_sq(nodes_[node.left], query);
    const double dr = box_distance_sq(nodes_[node.right], query);
    // Nearer child on top of the stack.
    if (dl <= dr) {
      stack.push_back({node.right, dr});
      stack.push_back({node.left, dl});
    } else {
      stack.push_back({node.left, dl});
      stack.push_back({node.right, dr});
    }
  }
  return best;
}

std::vector<KdTree::Neighbor> KdTree::radius_search(const Point3& query, double radius) const {
  if (radius < 0.0) return {};
  return radius_search_sq(query, radius * radius);
}

std::vector<KdTree::Neighbor> KdTree::radius_search_sq(const Point3& query, double r2) const {
  std::vector<Neighbor> result;
  if (r2 < 0.0) return result;
  auto visit = [&](auto&& self, std::int32_t id) -> void {
    const Node& node = nodes_[id];
    if (box_distance_sq(node, query) > r2) return;
    if (node.leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const double d = squared_distance(query, points_[order_[i]]);
        if (d <= r2) result.push_back({order_[i], d});
      }
      return;
    }
    self(self, node.left);
    self(self, node.right);
  };
  visit(visit, 0);
  std::sort(result.begin(), result.end(), closer);
  return result;
}

std::optional<KdTree::Neighbor> KdTree::nearest(const Point3& query) const {
  auto r = knn(query, 1);
  if (r.empty()) return std::nullopt;
  return r.front();
}

}  // namespace panoref
