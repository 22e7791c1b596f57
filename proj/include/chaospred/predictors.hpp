#pragma once

// Local predictors on a neighbour set: the zeroth-order neighbour mean and
// the first-order local linear (ridge) fit, whose plane is evaluated at the
// query even when it lies outside the neighbours' hull.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "embedding.hpp"
#include "error.hpp"
#include "neighbors.hpp"

namespace chaospred {

inline constexpr double kDefaultRidge = 1e-6;

inline double predict_local_mean(std::span<const double> targets) {
  detail::require(!targets.empty(), "neighbors", "empty neighbor set");
  double sum = 0.0;
  for (double y : targets) sum += y;
  return sum / static_cast<double>(targets.size());
}

inline std::vector<double> neighbor_targets(const NeighborSet& neighbors, const EmbeddedDataset& dataset) {
  std::vector<double> y;
  y.reserve(neighbors.size());
  for (auto i : neighbors.indices) y.push_back(dataset.y[i]);
  return y;
}

inline double predict_local_mean(const NeighborSet& neighbors, const EmbeddedDataset& dataset) {
  return predict_local_mean(neighbor_targets(neighbors, dataset));
}

struct LocalLinearFit {
  double intercept = 0.0;
  std::vector<double> beta;    // slopes on standardized coordinates
  double lambda = 0.0;
  double prediction = 0.0;
  std::vector<double> residuals;
  std::vector<double> center;  // neighbour mean of x
  std::vector<double> scale;   // per-coordinate standard deviation (1 when degenerate)
};

/// Ridge regression of neighbour targets on neighbour delay vectors. The
/// design is centred and scaled within the neighbourhood; only slopes are
/// penalised, so the intercept is the neighbour target mean.
inline LocalLinearFit predict_local_linear(const NeighborSet& neighbors, const EmbeddedDataset& dataset,
                                           std::span<const double> query, double lambda) {
  const std::size_t k = neighbors.size();
  const std::size_t p = dataset.spec.dimension();
  detail::require(k >= 2, "neighbors", "local linear fit needs at least 2 neighbors");
  detail::require(std::isfinite(lambda) && lambda >= 0.0, "lambda", "must be non-negative");
  detail::require(query.size() == p, "query", "dimension does not match the dataset");

  LocalLinearFit fit;
  fit.lambda = lambda;
  fit.center.assign(p, 0.0);
  fit.scale.assign(p, 0.0);
  const auto kd = static_cast<double>(k);
  for (auto i : neighbors.indices)
    for (std::size_t j = 0; j < p; ++j) fit.center[j] += dataset.x(i, j);
  for (auto& c : fit.center) c /= kd;
  for (auto i : neighbors.indices)
    for (std::size_t j = 0; j < p; ++j) {
      const double d = dataset.x(i, j) - fit.center[j];
      fit.scale[j] += d * d;
    }
  for (auto& s : fit.scale) {
    s = std::sqrt(s / kd);
    if (s < 1e-12) s = 1.0;
  }

  const std::vector<double> y = neighbor_targets(neighbors, dataset);
  fit.intercept = predict_local_mean(y);

  // [Z; sqrt(lambda) I] beta = [y - ybar; 0]
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k + p), static_cast<Eigen::Index>(p));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k + p));
  for (std::size_t r = 0; r < k; ++r) {
    const auto i = neighbors.indices[r];
    for (std::size_t j = 0; j < p; ++j)
      A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = (dataset.x(i, j) - fit.center[j]) / fit.scale[j];
    b(static_cast<Eigen::Index>(r)) = y[r] - fit.intercept;
  }
  const double root = std::sqrt(lambda);
  for (std::size_t j = 0; j < p; ++j)
    A(static_cast<Eigen::Index>(k + j), static_cast<Eigen::Index>(j)) = root;
  const Eigen::VectorXd beta = A.colPivHouseholderQr().solve(b);
  if (!beta.allFinite()) throw NumericalError("local linear solve produced non-finite coefficients");

  fit.beta.assign(beta.data(), beta.data() + p);
  fit.prediction = fit.intercept;
  for (std::size_t j = 0; j < p; ++j) fit.prediction += fit.beta[j] * (query[j] - fit.center[j]) / fit.scale[j];
  if (!std::isfinite(fit.prediction)) throw NumericalError("local linear prediction is not finite");

  fit.residuals.resize(k);
  for (std::size_t r = 0; r < k; ++r) {
    double fitted = fit.intercept;
    for (std::size_t j = 0; j < p; ++j)
      fitted += fit.beta[j] * static_cast<double>(A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)));
    fit.residuals[r] = y[r] - fitted;
  }
  return fit;
}

enum class PredictionMethod { mean, linear };

inline std::string_view to_string(PredictionMethod m) { return m == PredictionMethod::linear ? "linear" : "mean"; }

struct Prediction {
  double value = 0.0;
  PredictionMethod method = PredictionMethod::mean;
  std::vector<double> residuals;  // neighbour targets minus their fitted values
};

/// Local linear when there are at least p + 2 neighbours and the solve is
/// finite, otherwise the neighbour mean.
inline Prediction fallback_predict(const NeighborSet& neighbors, const EmbeddedDataset& dataset,
                                   std::span<const double> query, double lambda) {
  detail::require(neighbors.size() >= 1, "neighbors", "empty neighbor set");
  if (neighbors.size() >= dataset.spec.dimension() + 2) {
    try {
      auto fit = predict_local_linear(neighbors, dataset, query, lambda);
      return {fit.prediction, PredictionMethod::linear, std::move(fit.residuals)};
    } catch (const NumericalError&) {
    }
  }
  const std::vector<double> y = neighbor_targets(neighbors, dataset);
  const double mean = predict_local_mean(y);
  Prediction out{mean, PredictionMethod::mean, {}};
  out.residuals.reserve(y.size());
  for (double v : y) out.residuals.push_back(v - mean);
  return out;
}

}  // namespace chaospred

namespace chaospred {

struct ForecastOptions {
  double c = 1.0;
  double gamma = 0.5;
  std::optional<std::size_t> k;  // fixed neighbour count; otherwise the schedule
  double lambda = kDefaultRidge;
  std::size_t exclusion = 0;
  bool causal = true;  // train only on rows whose target is known by the query time
};

struct ResidualSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
};

inline ResidualSummary summarize(std::span<const double> r) {
  ResidualSummary s;
  s.count = r.size();
  if (r.empty()) return s;
  s.min = s.max = r[0];
  for (double v : r) {
    s.mean += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean /= static_cast<double>(r.size());
  for (double v : r) s.sd += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(s.sd / static_cast<double>(r.size()));
  return s;
}

struct RowForecast {
  std::size_t time = 0;
  double truth = 0.0;
  double mean_prediction = 0.0;
  std::optional<double> linear_prediction;  // absent with fewer than 2 neighbours
  PredictionMethod method = PredictionMethod::mean;
  ResidualSummary residuals;
  std::size_t neighbors = 0;
};

/// One-step-ahead forecasts for the dataset rows at `query_times`, each made
/// from the other rows of the same dataset.
inline std::vector<RowForecast> forecast_rows(const EmbeddedDataset& data, std::span<const std::size_t> query_times,
                                              const ForecastOptions& opts) {
  detail::require(std::isfinite(opts.lambda) && opts.lambda >= 0.0, "lambda", "must be non-negative");
  if (opts.k) detail::require(*opts.k >= 1, "k", "must be at least 1");
  const NeighborIndex index(data);
  const std::size_t h = data.spec.horizon;

  std::vector<RowForecast> out;
  out.reserve(query_times.size());
  for (std::size_t q : query_times) {
    const auto it = std::lower_bound(data.times.begin(), data.times.end(), q);
    detail::require(it != data.times.end() && *it == q, "test_times", "no row at time " + std::to_string(q));
    const auto row = static_cast<std::size_t>(it - data.times.begin());

    TimeWindow window{q, opts.exclusion, std::nullopt};
    std::size_t available = data.size();
    if (opts.causal) {
      detail::require(q >= h, "test_times", "no training rows before time " + std::to_string(q));
      window.latest_time = q - h;
      available = static_cast<std::size_t>(std::upper_bound(data.times.begin(), data.times.end(), q - h) -
                                           data.times.begin());
      detail::require(available >= 1, "test_times", "no training rows before time " + std::to_string(q));
    }
    const std::size_t k = opts.k ? *opts.k : neighbor_schedule(available, opts.c, opts.gamma);
    const auto query = data.row(row);
    const NeighborSet nb = index.query(query, k, window);

    RowForecast f;
    f.time = q;
    f.truth = data.y[row];
    f.neighbors = nb.size();
    f.mean_prediction = predict_local_mean(nb, data);
    if (nb.size() >= 2) {
      try {
        f.linear_prediction = predict_local_linear(nb, data, query, opts.lambda).prediction;
      } catch (const NumericalError&) {
      }
    }
    const Prediction chosen = fallback_predict(nb, data, query, opts.lambda);
    f.method = chosen.method;
    f.residuals = summarize(chosen.residuals);
    out.push_back(f);
  }
  return out;
}

}  // namespace chaospred
