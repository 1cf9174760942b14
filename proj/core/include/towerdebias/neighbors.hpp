#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "towerdebias/matrix.hpp"

namespace tdb {

struct Neighbor {
  double distance2;  // squared Euclidean distance
  std::size_t index;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Orders by distance, then by index: equal distances resolve to the lower
/// reference index.
inline bool closer(const Neighbor& a, const Neighbor& b) noexcept {
  return a.distance2 < b.distance2 ||
         (a.distance2 == b.distance2 && a.index < b.index);
}

/// Squared Euclidean distance, accumulated in coordinate order.
double squared_distance(std::span<const double> a, std::span<const double> b);

/// Mean of values[n.index] over the neighbor set, summed in ascending index
/// order. Equal sets give bit-identical means.
double neighbor_mean(std::span<const Neighbor> neighbors, std::span<const double> values);

/// Exact k-nearest-neighbor index over the rows of a matrix.
///
/// Results are identical to sorting every reference row by (distance, index)
/// and keeping the first k: subtrees are pruned only when their bounding-box
/// distance is strictly greater than the current k-th candidate.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(RowMatrix points, std::size_t leaf_size = 16);

  std::size_t size() const noexcept { return points_.rows(); }
  std::size_t dims() const noexcept { return points_.cols(); }
  const RowMatrix& points() const noexcept { return points_; }

  /// The min(k, size()) nearest rows, sorted by closer().
  std::vector<Neighbor> knn(std::span<const double> query, std::size_t k) const;

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t left = 0;  // 0 marks a leaf; the root is never a child
    std::size_t right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end);
  double box_distance(std::size_t node, std::span<const double> query) const;
  void search(std::size_t node, std::span<const double> query, std::size_t k,
              std::vector<Neighbor>& heap) const;

  RowMatrix points_;
  std::size_t leaf_size_ = 16;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::vector<double> lo_;  // per-node bounding box, nodes x dims
  std::vector<double> hi_;
};

}  // namespace tdb
