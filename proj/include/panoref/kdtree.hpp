#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "panoref/core.hpp"

namespace panoref {

// Exact 3D kd-tree. Results are ordered by (squared distance, index), so
// equidistant neighbors always come back in index order.
class KdTree {
 public:
  struct Neighbor {
    std::uint32_t index;
    double distance_sq;
    friend bool operator==(const Neighbor&, const Neighbor&) = default;
  };

  struct Node {
    std::array<float, 3> lo;
    std::array<float, 3> hi;
    std::uint32_t begin;  // range into order()
    std::uint32_t end;
    std::int32_t left{-1};
    std::int32_t right{-1};
    bool leaf() const { return left < 0; }
  };

  explicit KdTree(std::span<const Point3> points, std::size_t leaf_size = 12);

  std::size_t size() const { return points_.size(); }
  std::span<const Point3> points() const { return points_; }

  std::vector<Neighbor> knn(const Point3& query, std::size_t k) const;
  std::vector<Neighbor> radius_search(const Point3& query, double radius) const;
  // All points with squared distance <= r2 (no rounding through sqrt).
  std::vector<Neighbor> radius_search_sq(const Point3& query, double r2) const;
  std::optional<Neighbor> nearest(const Point3& query) const;

  // Tree internals for algorithms that run their own traversals; node 0 is
  // the root and children always have larger ids than their parent.
  const std::vector<Node>& nodes() const { return nodes_; }
  std::span<const std::uint32_t> order() const { return order_; }
  static double box_distance_sq(const Node& node, const Point3& q);

 private:
  std::int32_t build(std::uint32_t begin, std::uint32_t end, std::size_t leaf_size);

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace panoref
