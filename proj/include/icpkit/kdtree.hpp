#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "icpkit/errors.hpp"
#include "icpkit/geometry.hpp"

namespace icpkit {

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = std::numeric_limits<double>::infinity();
};

/// Exact nearest neighbor by linear scan. Ties break toward the lowest
/// point index. Reference behaviour for SpatialIndex.
inline Neighbor nearest_linear(const PointCloud& cloud, const Vec3& query) {
  if (cloud.empty()) throw EmptyCloudError("nearest neighbor in empty cloud");
  Neighbor best;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d2 = (cloud.points[i] - query).squaredNorm();
    if (d2 < best.squared_distance) {
      best.index = i;
      best.squared_distance = d2;
    }
  }
  return best;
}

/// kd-tree over a point cloud. Exact: returns the same neighbor as
/// nearest_linear, including the lowest-index rule on ties. The cloud must
/// outlive the index.
class SpatialIndex {
 public:
  static constexpr std::size_t kLeafSize = 16;

  explicit SpatialIndex(const PointCloud& cloud,
                        std::size_t leaf_size = kLeafSize)
      : cloud_(&cloud), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    if (cloud.empty()) throw EmptyCloudError("index over empty cloud");
    order_.resize(cloud.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * cloud.size() / leaf_size_ + 2);
    build(0, cloud.size());
  }

  const PointCloud& cloud() const { return *cloud_; }

  Neighbor nearest(const Vec3& query) const {
    Neighbor best;
    search(0, query, best);
    return best;
  }

  /// k nearest neighbors sorted by (squared distance, index).
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const {
    k = std::min(k, cloud_->size());
    std::vector<Neighbor> heap;  // max-heap, worst kept at the front
    heap.reserve(k + 1);
    search_knn(0, query, k, heap);
    std::sort(heap.begin(), heap.end(), closer);
    return heap;
  }

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t node_id = nodes_.size();
    nodes_.push_back({begin, end, -1, 0.0, 0, 0});
    if (end - begin <= leaf_size_) return node_id;

    Vec3 lo = cloud_->points[order_[begin]];
    Vec3 hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      const Vec3& p = cloud_->points[order_[i]];
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Vec3 extent = hi - lo;
    int axis = 0;
    if (extent.y() > extent.x()) axis = 1;
    if (extent.z() > extent[axis]) axis = 2;
    if (extent[axis] <= 0.0) return node_id;  // all points coincide: leaf

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                       const double pa = cloud_->points[a][axis];
                       const double pb = cloud_->points[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const double split = cloud_->points[order_[mid]][axis];

    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[node_id].axis = axis;
    nodes_[node_id].split = split;
    nodes_[node_id].left = left;
    nodes_[node_id].right = right;
    return node_id;
  }

  static bool closer(const Neighbor& a, const Neighbor& b) {
    return a.squared_distance < b.squared_distance ||
           (a.squared_distance == b.squared_distance && a.index < b.index);
  }

  void scan_leaf(const Node& node, const Vec3& query, Neighbor& best) const {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const double d2 = (cloud_->points[idx] - query).squaredNorm();
      if (closer({idx, d2}, best)) best = {idx, d2};
    }
  }

  void search(std::size_t node_id, const Vec3& query, Neighbor& best) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      scan_leaf(node, query, best);
      return;
    }
    const double delta = query[node.axis] - node.split;
    const std::size_t near = delta < 0.0 ? node.left : node.right;
    const std::size_t far = delta < 0.0 ? node.right : node.left;
    search(near, query, best);
    // Prune only on a strictly larger gap: a subtree whose boundary sits
    // exactly at the best distance may hold an equal-distance point with a
    // lower index.
    if (delta * delta <= best.squared_distance) search(far, query, best);
  }

  void search_knn(std::size_t node_id, const Vec3& query, std::size_t k,
                  std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = (cloud_->points[idx] - query).squaredNorm();
        const Neighbor cand{idx, d2};
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
    const double delta = query[node.axis] - node.split;
    const std::size_t near = delta < 0.0 ? node.left : node.right;
    const std::size_t far = delta < 0.0 ? node.right : node.left;
    search_knn(near, query, k, heap);
    const double bound = heap.size() < k
                             ? std::numeric_limits<double>::infinity()
                             : heap.front().squared_distance;
    if (delta * delta <= bound) search_knn(far, query, k, heap);
  }

  const PointCloud* cloud_;
  std::size_t leaf_size_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace icpkit
