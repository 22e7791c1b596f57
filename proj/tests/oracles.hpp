#pragma once

// Independent reference computations used only by the tests. Each one takes
// the most direct route (full scans, explicit sets, Gaussian elimination) and
// shares no code path with the library routine it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "chaospred.hpp"

namespace oracle {

using chaospred::EmbeddedDataset;
using chaospred::Matrix;

/// Full distance sort of every eligible row; ties by smaller time.
inline std::vector<std::size_t> knn(const EmbeddedDataset& d, std::span<const double> q, std::size_t k,
                                    std::size_t query_time, std::size_t exclusion,
                                    std::size_t latest_time = static_cast<std::size_t>(-1)) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t t = d.times[i];
    const std::size_t gap = t > query_time ? t - query_time : query_time - t;
    if (gap <= exclusion || t > latest_time) continue;
    double s = 0;
    for (std::size_t j = 0; j < q.size(); ++j) s += (q[j] - d.x(i, j)) * (q[j] - d.x(i, j));
    all.emplace_back(s, t, i);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(std::get<2>(all[i]));
  return out;
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= A[i][k] * x[k];
    x[i] = s / A[i][i];
  }
  return x;
}

/// Ridge fit through the normal equations (X'X + P) w = X'y with design
/// X = [1, standardized x] and P = diag(0, lambda, ..., lambda).
/// Returns (intercept, slopes...).
inline std::vector<double> ridge_normal_equations(const std::vector<std::vector<double>>& xs,
                                                  const std::vector<double>& ys, double lambda) {
  const std::size_t k = xs.size(), p = xs[0].size();
  std::vector<double> mean(p, 0.0), sd(p, 0.0);
  for (const auto& x : xs)
    for (std::size_t j = 0; j < p; ++j) mean[j] += x[j] / static_cast<double>(k);
  for (const auto& x : xs)
    for (std::size_t j = 0; j < p; ++j) sd[j] += (x[j] - mean[j]) * (x[j] - mean[j]) / static_cast<double>(k);
  for (auto& s : sd) s = std::sqrt(s) < 1e-12 ? 1.0 : std::sqrt(s);

  std::vector<std::vector<double>> X(k, std::vector<double>(p + 1, 1.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < p; ++j) X[i][j + 1] = (xs[i][j] - mean[j]) / sd[j];
  std::vector<std::vector<double>> A(p + 1, std::vector<double>(p + 1, 0.0));
  std::vector<double> b(p + 1, 0.0);
  for (std::size_t r = 0; r <= p; ++r) {
    for (std::size_t c = 0; c <= p; ++c)
      for (std::size_t i = 0; i < k; ++i) A[r][c] += X[i][r] * X[i][c];
    for (std::size_t i = 0; i < k; ++i) b[r] += X[i][r] * ys[i];
    if (r > 0) A[r][r] += lambda;
  }
  return solve(A, b);
}

/// Every pair (i, j) checked directly against the membership rule.
inline std::vector<std::size_t> self_intersections(const EmbeddedDataset& d, const Matrix& states, double delta,
                                                   double epsilon) {
  auto dist = [](std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j)
      if (i != j && dist(d.row(i), d.row(j)) <= epsilon && dist(states.row(i), states.row(j)) > delta) {
        out.push_back(i);
        break;
      }
  return out;
}

/// Occupied cubes counted through an explicit set of integer cell tuples.
inline std::size_t occupied_cells(const std::vector<std::vector<double>>& pts, double eps) {
  std::vector<double> lo = pts[0];
  for (const auto& p : pts)
    for (std::size_t c = 0; c < p.size(); ++c) lo[c] = std::min(lo[c], p[c]);
  std::set<std::vector<long long>> cells;
  for (const auto& p : pts) {
    std::vector<long long> cell;
    for (std::size_t c = 0; c < p.size(); ++c) cell.push_back(static_cast<long long>(std::floor((p[c] - lo[c]) / eps)));
    cells.insert(cell);
  }
  return cells.size();
}

/// Expanded (value, weight) list in component order.
inline std::vector<std::pair<double, double>> atoms(const chaospred::PredictiveDensity& d) {
  std::vector<std::pair<double, double>> out;
  for (const auto& c : d.components)
    for (double r : c.residuals) out.emplace_back(c.mu + r, c.weight / static_cast<double>(c.residuals.size()));
  return out;
}

/// Sort by value, walk cumulative weight, first value reaching q.
inline double quantile(const chaospred::PredictiveDensity& d, double q) {
  auto a = atoms(d);
  std::stable_sort(a.begin(), a.end(), [](auto& l, auto& r) { return l.first < r.first; });
  double cum = 0;
  for (auto& [v, w] : a) {
    cum += w;
    if (cum >= q) return v;
  }
  return a.back().first;
}

inline double tail(const chaospred::PredictiveDensity& d, double threshold) {
  double p = 0;
  for (auto& [v, w] : atoms(d))
    if (v > threshold) p += w;
  return p;
}

}  // namespace oracle
