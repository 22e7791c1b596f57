#pragma once

// Embedding-geometry diagnostics: box-counting dimension, empirical
// delta-distant self-intersection sets, and the four-way split of test
// indices by which of two delay maps is ambiguous there.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "embedding.hpp"
#include "error.hpp"
#include "matrix.hpp"

namespace chaospred {

// ---------------------------------------------------------------------------
// Box counting

struct BoxDimEstimate {
  std::vector<double> eps_grid;     // strictly decreasing
  std::vector<std::size_t> counts;  // occupied cubes per eps
  double d = 0.0;                   // slope of log N against -log eps
  double r2 = 1.0;

  /// Fits with r2 below this are reported but flagged.
  static constexpr double kGoodFit = 0.95;
  [[nodiscard]] bool poor_fit() const noexcept { return r2 < kGoodFit; }
};

/// `count` values from `largest` down to `smallest`, equally spaced in log.
inline std::vector<double> geometric_grid(double largest, double smallest, std::size_t count) {
  detail::require(largest > smallest && smallest > 0.0, "eps_grid", "need largest > smallest > 0");
  detail::require(count >= 2, "eps_grid", "need at least two scales");
  std::vector<double> grid(count);
  const double ratio = std::log(smallest / largest) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) grid[i] = largest * std::exp(ratio * static_cast<double>(i));
  grid.front() = largest;
  grid.back() = smallest;
  return grid;
}

/// Number of distinct cubes of side eps, anchored at `origin`, that contain a point.
inline std::size_t count_occupied_boxes(const Matrix& points, std::span<const double> origin, double eps) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  std::vector<std::int64_t> keys(n * dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < dim; ++c)
      keys[i * dim + c] = static_cast<std::int64_t>(std::floor((points(i, c) - origin[c]) / eps));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) { return std::span<const std::int64_t>(keys.data() + i * dim, dim); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ka = key(a), kb = key(b);
    return std::lexicographical_compare(ka.begin(), ka.end(), kb.begin(), kb.end());
  });
  std::size_t distinct = n > 0 ? 1 : 0;
  for (std::size_t i = 1; i < n; ++i) {
    auto ka = key(order[i - 1]), kb = key(order[i]);
    if (!std::equal(ka.begin(), ka.end(), kb.begin())) ++distinct;
  }
  return distinct;
}

inline BoxDimEstimate estimate_box_dimension(const Matrix& points, std::span<const double> eps_grid) {
  detail::require(points.rows() >= 2, "points", "need at least two points");
  detail::require(points.cols() >= 1, "points", "points need at least one coordinate");
  detail::require(eps_grid.size() >= 2, "eps_grid", "need at least two scales");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    detail::require(std::isfinite(eps_grid[i]) && eps_grid[i] > 0.0, "eps_grid", "scales must be positive");
    if (i > 0) detail::require(eps_grid[i] < eps_grid[i - 1], "eps_grid", "scales must be strictly decreasing");
  }

  std::vector<double> origin(points.row(0).begin(), points.row(0).end());
  for (std::size_t i = 1; i < points.rows(); ++i)
    for (std::size_t c = 0; c < points.cols(); ++c) origin[c] = std::min(origin[c], points(i, c));

  BoxDimEstimate est;
  est.eps_grid.assign(eps_grid.begin(), eps_grid.end());
  for (double eps : eps_grid) est.counts.push_back(count_occupied_boxes(points, origin, eps));

  // Ordinary least squares of log N on -log eps.
  const auto m = static_cast<double>(eps_grid.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    sx += -std::log(eps_grid[i]);
    sy += std::log(static_cast<double>(est.counts[i]));
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    const double dx = -std::log(eps_grid[i]) - mx;
    const double dy = std::log(static_cast<double>(est.counts[i])) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double slope = sxy / sxx;
  est.d = std::max(0.0, slope);
  est.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return est;
}

// ---------------------------------------------------------------------------
// Self-intersections

/// Rows i for which some row j lies more than `delta` away in state space
/// while its image under the delay map is within `epsilon` of row i's.
struct SelfIntersectionReport {
  double delta = 0.0;
  double epsilon = 0.0;
  std::vector<std::size_t> flagged;  // ascending row indices
  double fraction = 0.0;
  std::size_t rows = 0;
  std::size_t first_time = 0;  // row time of index 0, to check alignment

  friend bool operator==(const SelfIntersectionReport&, const SelfIntersectionReport&) = default;
};

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Sweep over rows sorted by the first image coordinate; only pairs whose
/// first coordinates differ by at most epsilon can meet the image test, so the
/// flagged set equals that of the full pair scan.
inline SelfIntersectionReport find_self_intersections(const EmbeddedDataset& dataset,
                                                      const Matrix& state_points, double delta,
                                                      double epsilon) {
  detail::require(state_points.rows() == dataset.size(), "state_points",
                  "expected one state per embedded row (" + std::to_string(dataset.size()) + "), got " +
                      std::to_string(state_points.rows()));
  detail::require(std::isfinite(delta) && delta > 0.0, "delta", "must be positive");
  detail::require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon", "must be positive");

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dataset.x(a, 0) < dataset.x(b, 0); });

  const double window = epsilon * (1.0 + 1e-12);
  std::vector<char> hit(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t i = order[a];
    for (std::size_t b = a + 1; b < n; ++b) {
      const std::size_t j = order[b];
      if (dataset.x(j, 0) - dataset.x(i, 0) > window) break;
      if (hit[i] && hit[j]) continue;
      if (euclidean(dataset.row(i), dataset.row(j)) > epsilon) continue;
      if (euclidean(state_points.row(i), state_points.row(j)) > delta) hit[i] = hit[j] = 1;
    }
  }

  SelfIntersectionReport report{delta, epsilon, {}, 0.0, n, n > 0 ? dataset.times.front() : 0};
  for (std::size_t i = 0; i < n; ++i)
    if (hit[i]) report.flagged.push_back(i);
  report.fraction = n > 0 ? static_cast<double>(report.flagged.size()) / static_cast<double>(n) : 0.0;
  return report;
}

struct OverlapRecord {
  double overlap = 0.0;  // |flagged1 & flagged2| / rows
  double fraction1 = 0.0;
  double fraction2 = 0.0;
  std::size_t shared = 0;
  std::size_t rows = 0;
};

namespace detail {

inline void require_same_rows(const SelfIntersectionReport& a, const SelfIntersectionReport& b) {
  require(a.rows == b.rows && a.first_time == b.first_time, "reports",
          "reports cover different row index sets");
}

}  // namespace detail

inline OverlapRecord intersection_overlap(const SelfIntersectionReport& r1, const SelfIntersectionReport& r2) {
  detail::require_same_rows(r1, r2);
  std::vector<std::size_t> shared;
  std::set_intersection(r1.flagged.begin(), r1.flagged.end(), r2.flagged.begin(), r2.flagged.end(),
                        std::back_inserter(shared));
  const auto n = static_cast<double>(r1.rows);
  return {r1.rows > 0 ? static_cast<double>(shared.size()) / n : 0.0, r1.fraction, r2.fraction,
          shared.size(), r1.rows};
}

// ---------------------------------------------------------------------------
// Four-way decomposition of test indices

struct Exhibit1Report {
  std::vector<std::size_t> S1;  // ambiguous under both maps
  std::vector<std::size_t> S2;  // only under the first
  std::vector<std::size_t> S3;  // only under the second
  std::vector<std::size_t> S4;  // under neither
  std::vector<std::pair<double, double>> paired_predictions;

  [[nodiscard]] std::size_t size() const noexcept { return S1.size() + S2.size() + S3.size() + S4.size(); }
};

inline Exhibit1Report exhibit1_decomposition(const SelfIntersectionReport& r1, const SelfIntersectionReport& r2,
                                             std::vector<std::pair<double, double>> predictions) {
  detail::require_same_rows(r1, r2);
  detail::require(predictions.size() == r1.rows, "predictions",
                  "expected one prediction pair per row (" + std::to_string(r1.rows) + ")");
  std::vector<char> in1(r1.rows, 0), in2(r1.rows, 0);
  for (auto i : r1.flagged) in1[i] = 1;
  for (auto i : r2.flagged) in2[i] = 1;

  Exhibit1Report out;
  for (std::size_t i = 0; i < r1.rows; ++i) {
    if (in1[i] && in2[i]) out.S1.push_back(i);
    else if (in1[i]) out.S2.push_back(i);
    else if (in2[i]) out.S3.push_back(i);
    else out.S4.push_back(i);
  }
  out.paired_predictions = std::move(predictions);
  return out;
}

}  // namespace chaospred
