#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "geometry.hpp"

namespace nss3dqa {

struct Neighbor {
  double squared_distance;
  std::uint32_t index;

  friend constexpr auto operator<=>(const Neighbor&, const Neighbor&) = default;
};

/// Exact k-nearest-neighbour index over a fixed point set.
///
/// Results are ordered by (squared distance, index), so equidistant
/// neighbours come out in ascending index order. The tree keeps a view of
/// the points; they must outlive it.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 16)
      : points_(points), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points.empty()) build(0, static_cast<std::uint32_t>(points.size()));
  }

  std::size_t size() const { return points_.size(); }
  std::span<const Vec3> points() const { return points_; }

  /// The k nearest points to `query`; `exclude` (if a valid index) is skipped.
  void nearest(Vec3 query, std::size_t k, std::vector<Neighbor>& out,
               std::uint32_t exclude = UINT32_MAX) const {
    out.clear();
    if (k == 0 || nodes_.empty()) return;
    search(0, query, k, exclude, out);
    std::sort_heap(out.begin(), out.end());
  }

  std::vector<std::uint32_t> nearest_indices(std::uint32_t query_index, std::size_t k) const {
    std::vector<Neighbor> nb;
    nearest(points_[query_index], k, nb, query_index);
    std::vector<std::uint32_t> idx(nb.size());
    std::transform(nb.begin(), nb.end(), idx.begin(), [](const Neighbor& n) { return n.index; });
    return idx;
  }

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // range in order_ (leaves)
    std::uint32_t left = 0, right = 0; // children (inner nodes)
    double split = 0;
    int axis = -1;  // -1 for leaves
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({begin, end, 0, 0, 0.0, -1});
    if (end - begin <= leaf_size_) return id;

    Aabb box;
    for (auto i = begin; i < end; ++i) box.extend(points_[order_[i]]);
    const Vec3 ext = box.hi - box.lo;
    int axis = 0;
    if (ext.y > ext[axis]) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    if (ext[axis] <= 0) return id;  // all coincident

    const auto mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double pa = points_[a][axis], pb = points_[b][axis];
                       return pa < pb || (pa == pb && a < b);
                     });
    const double split = points_[order_[mid]][axis];
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    Node& n = nodes_[id];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
  }

  void offer(const Neighbor& cand, std::size_t k, std::vector<Neighbor>& heap) const {
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end());
    } else if (cand < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end());
    }
  }

  void search(std::uint32_t node, Vec3 q, std::size_t k, std::uint32_t exclude, std::vector<Neighbor>& heap) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
      for (auto i = n.begin; i < n.end; ++i) {
        const auto idx = order_[i];
        if (idx == exclude) continue;
        offer({squared_distance(q, points_[idx]), idx}, k, heap);
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const auto near = diff < 0 ? n.left : n.right;
    const auto far = diff < 0 ? n.right : n.left;
    search(near, q, k, exclude, heap);
    // Equality still descends: an equidistant point with a lower index may win.
    if (heap.size() < k || diff * diff <= heap.front().squared_distance) search(far, q, k, exclude, heap);
  }

  std::span<const Vec3> points_;
  std::size_t leaf_size_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace nss3dqa
