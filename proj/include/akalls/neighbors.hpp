#pragma once

// Exact nearest-neighbor ordering over a pool. Order is by (squared
// Euclidean distance, pool index), so equal distances resolve to the lower
// index and every query has a single well-defined answer.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <utility>
#include <vector>

#include "error.hpp"
#include "problem.hpp"

namespace akalls {

enum class SearchMode { kd_tree, brute_force };

struct Neighbor {
  std::size_t index;
  double squared_distance;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Full neighbor order by sorting all distances.
inline std::vector<Neighbor> brute_force_order(const Pool& pool, PointView query) {
  std::vector<Neighbor> order(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) order[i] = {i, squared_distance(pool[i], query)};
  std::sort(order.begin(), order.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.squared_distance != b.squared_distance ? a.squared_distance < b.squared_distance : a.index < b.index;
  });
  return order;
}

class NeighborStream;

/// Kd-tree over a pool (leaf buckets, widest-spread median split).
/// Holds a reference to the pool; the pool must outlive the index.
class NeighborIndex {
 public:
  explicit NeighborIndex(const Pool& pool, SearchMode mode = SearchMode::kd_tree, std::size_t leaf_size = 8)
      : pool_(&pool), mode_(mode), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    if (mode_ == SearchMode::kd_tree) build();
  }

  const Pool& pool() const noexcept { return *pool_; }
  SearchMode mode() const noexcept { return mode_; }

  /// Lazy enumeration of the pool in nondecreasing distance from `query`.
  NeighborStream stream(PointView query) const;

  /// Pool index of the k-th closest point (k is 1-based).
  std::size_t kth_neighbor(PointView query, std::size_t k) const;

  /// min(#{i : |X_i - query|^2 < r2}, limit + 1).
  std::size_t count_within(PointView query, double r2, std::size_t limit) const {
    if (mode_ == SearchMode::brute_force) {
      std::size_t n = 0;
      for (std::size_t i = 0; i < pool_->size() && n <= limit; ++i) {
        if (squared_distance((*pool_)[i], query) < r2) ++n;
      }
      return n;
    }
    std::size_t n = 0;
    count_node(0, query, r2, limit, n);
    return n;
  }

 private:
  friend class NeighborStream;

  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t left = 0;
    std::size_t right = 0;  // 0 marks a leaf; the root is never a child
    std::vector<double> lo;
    std::vector<double> hi;
  };

  void build() {
    order_.resize(pool_->size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * pool_->size() / leaf_size_ + 1);
    build_node(0, order_.size());
  }

  std::size_t build_node(std::size_t begin, std::size_t end) {
    const std::size_t dim = pool_->dim();
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo.assign(dim, std::numeric_limits<double>::infinity());
    node.hi.assign(dim, -std::numeric_limits<double>::infinity());
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = (*pool_)[order_[i]];
      for (std::size_t j = 0; j < dim; ++j) {
        node.lo[j] = std::min(node.lo[j], p[j]);
        node.hi[j] = std::max(node.hi[j], p[j]);
      }
    }
    const std::size_t id = nodes_.size();
    nodes_.push_back(node);
    if (end - begin <= leaf_size_) return id;

    std::size_t axis = 0;
    for (std::size_t j = 1; j < dim; ++j) {
      if (node.hi[j] - node.lo[j] > node.hi[axis] - node.lo[axis]) axis = j;
    }
    if (node.hi[axis] == node.lo[axis]) return id;  // all points coincide

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return (*pool_)[a][axis] < (*pool_)[b][axis]; });
    const std::size_t left = build_node(begin, mid);
    const std::size_t right = build_node(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  // Never exceeds the squared distance to any point inside the box, even in
  // floating point (rounded subtraction and squaring are monotone).
  double box_squared_distance(const Node& node, PointView q) const noexcept {
    double acc = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      double gap = 0.0;
      if (q[j] < node.lo[j]) {
        gap = node.lo[j] - q[j];
      } else if (q[j] > node.hi[j]) {
        gap = q[j] - node.hi[j];
      }
      acc += gap * gap;
    }
    return acc;
  }

  void count_node(std::size_t id, PointView q, double r2, std::size_t limit, std::size_t& n) const {
    if (n > limit) return;
    const Node& node = nodes_[id];
    if (box_squared_distance(node, q) >= r2) return;
    if (node.right == 0) {
      for (std::size_t i = node.begin; i < node.end && n <= limit; ++i) {
        if (squared_distance((*pool_)[order_[i]], q) < r2) ++n;
      }
      return;
    }
    count_node(node.left, q, r2, limit, n);
    count_node(node.right, q, r2, limit, n);
  }

  const Pool* pool_;
  SearchMode mode_;
  std::size_t leaf_size_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Yields every pool index exactly once in (distance, index) order.
///
/// Kd-tree mode runs an incremental best-first search; brute-force mode
/// sorts all distances up front.
class NeighborStream {
 public:
  NeighborStream(const NeighborIndex& index, PointView query)
      : index_(&index), query_(query.begin(), query.end()) {
    if (index.mode() == SearchMode::brute_force) {
      sorted_ = brute_force_order(index.pool(), query_);
    } else {
      heap_.push({index_->box_squared_distance(index_->nodes_[0], query_), false, 0});
    }
  }

  std::optional<Neighbor> next() {
    if (index_->mode() == SearchMode::brute_force) {
      if (cursor_ >= sorted_.size()) return std::nullopt;
      return sorted_[cursor_++];
    }
    while (!heap_.empty()) {
      const Entry top = heap_.top();
      heap_.pop();
      if (top.is_point) {
        ++cursor_;
        return Neighbor{top.id, top.key};
      }
      const auto& node = index_->nodes_[top.id];
      if (node.right == 0) {
        for (std::size_t i = node.begin; i < node.end; ++i) {
          const std::size_t p = index_->order_[i];
          heap_.push({squared_distance(index_->pool()[p], query_), true, p});
        }
      } else {
        heap_.push({index_->box_squared_distance(index_->nodes_[node.left], query_), false, node.left});
        heap_.push({index_->box_squared_distance(index_->nodes_[node.right], query_), false, node.right});
      }
    }
    return std::nullopt;
  }

  /// Number of neighbors produced so far.
  std::size_t produced() const noexcept { return cursor_; }

 private:
  struct Entry {
    double key;
    bool is_point;
    std::size_t id;
  };
  // Min-heap on (key, nodes before points, index): a node whose bound ties a
  // point's distance may still contain an equidistant point of lower index.
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const noexcept {
      if (a.key != b.key) return a.key > b.key;
      if (a.is_point != b.is_point) return a.is_point;
      return a.id > b.id;
    }
  };

  const NeighborIndex* index_;
  Point query_;
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::vector<Neighbor> sorted_;
  std::size_t cursor_ = 0;
};

inline NeighborStream NeighborIndex::stream(PointView query) const { return NeighborStream(*this, query); }

inline std::size_t NeighborIndex::kth_neighbor(PointView query, std::size_t k) const {
  detail::require(k >= 1 && k <= pool_->size(), "kth_neighbor: k must lie in [1, w]");
  auto s = stream(query);
  std::optional<Neighbor> n;
  for (std::size_t i = 0; i < k; ++i) n = s.next();
  return n->index;
}

}  // namespace akalls
