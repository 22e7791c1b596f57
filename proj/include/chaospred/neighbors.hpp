#pragma once

// Exact k-nearest-neighbour search over delay vectors (kd-tree), with a
// temporal exclusion window and a cut-off on the latest usable row time.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "embedding.hpp"
#include "error.hpp"

namespace chaospred {

struct NeighborSet {
  std::vector<double> query;
  std::vector<std::size_t> indices;  // rows of the indexed dataset, nearest first
  std::vector<double> distances;
  std::size_t k = 0;                 // requested count
  bool truncated = false;            // fewer than k rows were eligible

  [[nodiscard]] std::size_t size() const noexcept { return indices.size(); }
};

/// Rows are eligible when |t - query_time| > exclusion and, if set, t <= latest_time.
struct TimeWindow {
  std::size_t query_time = 0;
  std::size_t exclusion = 0;
  std::optional<std::size_t> latest_time;

  [[nodiscard]] bool admits(std::size_t t) const noexcept {
    const std::size_t gap = t > query_time ? t - query_time : query_time - t;
    return gap > exclusion && (!latest_time || t <= *latest_time);
  }
};

class NeighborIndex {
 public:
  explicit NeighborIndex(const EmbeddedDataset& data)
      : dim_(data.spec.dimension()), points_(data.x), times_(data.times), order_(data.size()) {
    detail::require(data.size() >= 1, "dataset", "cannot index an empty dataset");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * data.size() / kLeafSize + 1);
    build(0, order_.size());
  }

  [[nodiscard]] std::size_t size() const noexcept { return order_.size(); }
  [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }

  /// k nearest eligible rows; ties go to the smaller row time.
  [[nodiscard]] NeighborSet query(std::span<const double> q, std::size_t k, const TimeWindow& window) const {
    detail::require(k >= 1, "k", "must be at least 1");
    detail::require(q.size() == dim_, "query", "dimension does not match the index");
    Search s{q, k, window, {}};
    search(0, s);
    if (s.heap.empty()) throw Error("no eligible neighbor rows for query at time " + std::to_string(window.query_time));
    std::sort_heap(s.heap.begin(), s.heap.end());
    NeighborSet out{{q.begin(), q.end()}, {}, {}, k, s.heap.size() < k};
    for (const auto& c : s.heap) {
      out.indices.push_back(c.row);
      out.distances.push_back(std::sqrt(c.d2));
    }
    return out;
  }

 private:
  static constexpr std::size_t kLeafSize = 16;

  struct Node {
    std::size_t begin, end;
    std::size_t axis = 0;
    double split = 0.0;
    std::size_t left = 0, right = 0;  // 0 marks a leaf (the root is never a child)
  };

  struct Candidate {
    double d2;
    std::size_t time;
    std::size_t row;
    bool operator<(const Candidate& o) const noexcept { return d2 < o.d2 || (d2 == o.d2 && time < o.time); }
  };

  struct Search {
    std::span<const double> q;
    std::size_t k;
    const TimeWindow& window;
    std::vector<Candidate> heap;  // max-heap on (d2, time)
  };

  [[nodiscard]] double coord(std::size_t row, std::size_t axis) const noexcept { return points_(row, axis); }

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;

    std::size_t axis = 0;
    double widest = 0.0;
    for (std::size_t a = 0; a < dim_; ++a) {
      double lo = coord(order_[begin], a), hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        lo = std::min(lo, coord(order_[i], a));
        hi = std::max(hi, coord(order_[i], a));
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        axis = a;
      }
    }
    if (widest == 0.0) return id;

    const std::size_t mid = begin + (end - begin) / 2;
    auto first = order_.begin();
    std::nth_element(first + static_cast<std::ptrdiff_t>(begin), first + static_cast<std::ptrdiff_t>(mid),
                     first + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return coord(a, axis) < coord(b, axis); });
    const double split = coord(order_[mid], axis);
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void offer(std::size_t row, Search& s) const {
    if (!s.window.admits(times_[row])) return;
    double d2 = 0.0;
    for (std::size_t a = 0; a < dim_; ++a) {
      const double d = s.q[a] - coord(row, a);
      d2 += d * d;
    }
    const Candidate c{d2, times_[row], row};
    if (s.heap.size() < s.k) {
      s.heap.push_back(c);
      std::push_heap(s.heap.begin(), s.heap.end());
    } else if (c < s.heap.front()) {
      std::pop_heap(s.heap.begin(), s.heap.end());
      s.heap.back() = c;
      std::push_heap(s.heap.begin(), s.heap.end());
    }
  }

  void search(std::size_t id, Search& s) const {
    const Node& node = nodes_[id];
    if (node.left == 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) offer(order_[i], s);
      return;
    }
    const double diff = s.q[node.axis] - node.split;
    const std::size_t near = diff < 0.0 ? node.left : node.right;
    const std::size_t far = diff < 0.0 ? node.right : node.left;
    search(near, s);
    // Equal-distance points beyond the plane can still win on time, so prune strictly.
    if (s.heap.size() < s.k || diff * diff <= s.heap.front().d2) search(far, s);
  }

  std::size_t dim_;
  Matrix points_;
  std::vector<std::size_t> times_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

inline NeighborIndex build_index(const EmbeddedDataset& dataset) { return NeighborIndex(dataset); }

inline NeighborSet query_knn(const NeighborIndex& index, std::span<const double> query, std::size_t k,
                             std::size_t query_time, std::size_t exclusion) {
  return index.query(query, k, TimeWindow{query_time, exclusion, std::nullopt});
}

/// k = max(2, ceil(c * n^gamma)), capped at n - 1 (and never below 1).
inline std::size_t neighbor_schedule(std::size_t n, double c, double gamma) {
  detail::require(n >= 1, "n", "must be at least 1");
  detail::require(std::isfinite(c) && c > 0.0, "c", "must be positive");
  detail::require(std::isfinite(gamma) && gamma > 0.0 && gamma < 1.0, "gamma", "must lie in (0, 1)");
  const double raw = std::ceil(c * std::pow(static_cast<double>(n), gamma));
  std::size_t k = raw >= static_cast<double>(n) ? n : static_cast<std::size_t>(raw);
  k = std::max<std::size_t>(2, k);
  return std::min(k, std::max<std::size_t>(1, n - 1));
}

}  // namespace chaospred
