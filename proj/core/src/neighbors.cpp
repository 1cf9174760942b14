#include "towerdebias/neighbors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "towerdebias/error.hpp"

namespace tdb {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    sum += d * d;
  }
  return sum;
}

double neighbor_mean(std::span<const Neighbor> neighbors, std::span<const double> values) {
  std::vector<std::size_t> idx(neighbors.size());
  for (std::size_t i = 0; i < neighbors.size(); ++i) idx[i] = neighbors[i].index;
  std::sort(idx.begin(), idx.end());
  double sum = 0.0;
  for (auto i : idx) sum += values[i];
  return sum / static_cast<double>(idx.size());
}

KdTree::KdTree(RowMatrix points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  order_.resize(points_.rows());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (points_.rows() > 0) {
    nodes_.reserve(2 * (points_.rows() / leaf_size_ + 1));
    build(0, points_.rows());
  }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  const std::size_t dims = points_.cols();
  nodes_.push_back({begin, end, 0, 0});
  lo_.resize(lo_.size() + dims, std::numeric_limits<double>::infinity());
  hi_.resize(hi_.size() + dims, -std::numeric_limits<double>::infinity());

  for (std::size_t i = begin; i < end; ++i) {
    const auto p = points_.row(order_[i]);
    for (std::size_t j = 0; j < dims; ++j) {
      lo_[id * dims + j] = std::min(lo_[id * dims + j], p[j]);
      hi_[id * dims + j] = std::max(hi_[id * dims + j], p[j]);
    }
  }
  if (end - begin <= leaf_size_ || dims == 0) return id;

  std::size_t axis = 0;
  double spread = -1.0;
  for (std::size_t j = 0; j < dims; ++j) {
    const double s = hi_[id * dims + j] - lo_[id * dims + j];
    if (s > spread) {
      spread = s;
      axis = j;
    }
  }
  if (spread <= 0.0) return id;  // all points coincide

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double va = points_(a, axis);
                     const double vb = points_(b, axis);
                     return va < vb || (va == vb && a < b);
                   });
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double KdTree::box_distance(std::size_t node, std::span<const double> query) const {
  // Same operation order as squared_distance, so the bound never exceeds the
  // floating-point distance of any point inside the box.
  const std::size_t dims = points_.cols();
  double sum = 0.0;
  for (std::size_t j = 0; j < dims; ++j) {
    const double lo = lo_[node * dims + j];
    const double hi = hi_[node * dims + j];
    double d = 0.0;
    if (query[j] < lo) {
      d = query[j] - lo;
    } else if (query[j] > hi) {
      d = query[j] - hi;
    }
    sum += d * d;
  }
  return sum;
}

void KdTree::search(std::size_t node, std::span<const double> query, std::size_t k,
                    std::vector<Neighbor>& heap) const {
  const auto& n = nodes_[node];
  if (n.left == 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const std::size_t idx = order_[i];
      const Neighbor cand{squared_distance(query, points_.row(idx)), idx};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }

  double dl = box_distance(n.left, query);
  double dr = box_distance(n.right, query);
  std::size_t first = n.left, second = n.right;
  if (dr < dl) {
    std::swap(first, second);
    std::swap(dl, dr);
  }
  if (heap.size() < k || dl <= heap.front().distance2) search(first, query, k, heap);
  if (heap.size() < k || dr <= heap.front().distance2) search(second, query, k, heap);
}

std::vector<Neighbor> KdTree::knn(std::span<const double> query, std::size_t k) const {
  if (query.size() != points_.cols()) {
    fail(ErrorKind::SchemaMismatch, "query has " + std::to_string(query.size()) +
                                        " coordinates, index has " +
                                        std::to_string(points_.cols()));
  }
  k = std::min(k, size());
  std::vector<Neighbor> heap;
  if (k == 0) return heap;
  heap.reserve(k);
  search(0, query, k, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

}  // namespace tdb
