#pragma once

// Multiview ensembles: one local prediction per delay map, each shifted by its
// own neighbour residuals, mixed into a discrete predictive density.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "embedding.hpp"
#include "error.hpp"
#include "neighbors.hpp"
#include "predictors.hpp"
#include "systems.hpp"

namespace chaospred {

struct DensityComponent {
  double mu = 0.0;
  std::vector<double> residuals;
  double weight = 0.0;

  friend bool operator==(const DensityComponent&, const DensityComponent&) = default;
};

/// Mixture of shifted residual atoms: component j contributes the values
/// mu_j + r, r in residuals_j, each with weight weight_j / |residuals_j|.
struct PredictiveDensity {
  std::vector<DensityComponent> components;

  [[nodiscard]] std::size_t support_size() const noexcept {
    std::size_t n = 0;
    for (const auto& c : components) n += c.residuals.size();
    return n;
  }

  friend bool operator==(const PredictiveDensity&, const PredictiveDensity&) = default;
};

inline void validate_density(const PredictiveDensity& d) {
  detail::require(!d.components.empty(), "density", "no components");
  double total = 0.0;
  for (const auto& c : d.components) {
    detail::require(std::isfinite(c.mu), "density", "component prediction is not finite");
    detail::require(c.weight > 0.0, "weights", "component weights must be positive");
    detail::require(!c.residuals.empty(), "density", "every component needs at least one residual");
    total += c.weight;
  }
  detail::require(std::abs(total - 1.0) <= 1e-12, "weights", "component weights must sum to 1");
}

struct Atom {
  double value;
  double weight;
};

/// Support atoms in component order, then residual order.
inline std::vector<Atom> support(const PredictiveDensity& d) {
  std::vector<Atom> atoms;
  atoms.reserve(d.support_size());
  for (const auto& c : d.components) {
    const double w = c.weight / static_cast<double>(c.residuals.size());
    for (double r : c.residuals) atoms.push_back({c.mu + r, w});
  }
  return atoms;
}

/// Weighted quantile, lower convention: the smallest support value whose
/// cumulative weight reaches q.
inline double density_quantile(const PredictiveDensity& d, double q) {
  detail::require(q > 0.0 && q < 1.0, "q", "must lie in (0, 1)");
  validate_density(d);
  std::vector<Atom> atoms = support(d);
  std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
  double cum = 0.0;
  for (const auto& a : atoms) {
    cum += a.weight;
    if (cum >= q) return a.value;
  }
  return atoms.back().value;
}

/// Total weight of support values strictly above `threshold`.
inline double tail_probability(const PredictiveDensity& d, double threshold) {
  double p = 0.0;
  for (const auto& c : d.components) {
    const double w = c.weight / static_cast<double>(c.residuals.size());
    for (double r : c.residuals)
      if (c.mu + r > threshold) p += w;
  }
  return p;
}

/// Total weight of support values at or below `x`.
inline double density_cdf(const PredictiveDensity& d, double x) {
  double p = 0.0;
  for (const auto& c : d.components) {
    const double w = c.weight / static_cast<double>(c.residuals.size());
    for (double r : c.residuals)
      if (c.mu + r <= x) p += w;
  }
  return std::clamp(p, 0.0, 1.0);
}

// ---------------------------------------------------------------------------

struct EnsembleConfig {
  double c = 1.0;
  double gamma = 0.5;
  double lambda = kDefaultRidge;
  std::size_t exclusion = 10;
  std::vector<double> weights;  // empty: equal weights
};

/// Theiler-window default: 10 steps for flows, none for maps.
inline std::size_t default_exclusion(SystemKind kind) { return is_flow(kind) ? 10 : 0; }

namespace detail {

inline void validate_ensemble(const PartitionEnsemble& ensemble, const EnsembleConfig& config) {
  require(!ensemble.specs.empty(), "ensemble", "no delay maps");
  for (const auto& s : ensemble.specs) {
    validate_delay_map(s);
    require(s.target == ensemble.specs.front().target && s.horizon == ensemble.specs.front().horizon, "ensemble",
            "all delay maps must share target and horizon");
  }
  require(std::isfinite(config.c) && config.c > 0.0, "c", "must be positive");
  require(std::isfinite(config.gamma) && config.gamma > 0.0 && config.gamma < 1.0, "gamma", "must lie in (0, 1)");
  require(std::isfinite(config.lambda) && config.lambda >= 0.0, "lambda", "must be non-negative");
  if (!config.weights.empty()) {
    require(config.weights.size() == ensemble.specs.size(), "weights", "need one weight per delay map");
    double total = 0.0;
    for (double w : config.weights) {
      require(std::isfinite(w) && w > 0.0, "weights", "must be positive");
      total += w;
    }
    require(std::abs(total - 1.0) <= 1e-12, "weights", "must sum to 1");
  }
}

}  // namespace detail

/// Predictive density for target(query_time + horizon) using only samples up
/// to and including query_time.
inline PredictiveDensity ensemble_predict(const MultiSeries& series, const PartitionEnsemble& ensemble,
                                          std::size_t query_time, const EnsembleConfig& config) {
  detail::validate_ensemble(ensemble, config);
  detail::require(query_time < series.length(), "query_time", "beyond the end of the series");
  const MultiSeries visible = series.head(query_time + 1);
  const std::size_t count = ensemble.specs.size();

  PredictiveDensity density;
  for (std::size_t s = 0; s < count; ++s) {
    const DelayMapSpec& spec = ensemble.specs[s];
    if (query_time < spec.max_lag() + spec.horizon + 1)
      throw ValidationError("query_time", "insufficient history at time " + std::to_string(query_time));
    const EmbeddedDataset train = build_embedding(visible, spec);
    const NeighborIndex index(train);
    const std::size_t k = neighbor_schedule(train.size(), config.c, config.gamma);
    const std::vector<double> q = delay_vector(visible, spec, query_time);
    const NeighborSet nb = index.query(q, k, TimeWindow{query_time, config.exclusion, std::nullopt});
    Prediction pred = fallback_predict(nb, train, q, config.lambda);
    const double w = config.weights.empty() ? 1.0 / static_cast<double>(count) : config.weights[s];
    density.components.push_back({pred.value, std::move(pred.residuals), w});
  }
  return density;
}

// ---------------------------------------------------------------------------
// Calibration

inline const std::vector<double>& default_coverage_levels() {
  static const std::vector<double> levels{0.5, 0.9};
  return levels;
}

struct CalibrationReport {
  std::vector<double> pit_values;
  std::map<double, double> coverage;  // nominal level -> empirical coverage
  std::vector<std::size_t> test_times;
  std::vector<double> truths;
  std::size_t min_spacing = 0;  // smallest gap between consecutive test times

  friend bool operator==(const CalibrationReport&, const CalibrationReport&) = default;
};

/// Central interval [Q((1-level)/2), Q((1+level)/2)].
inline std::pair<double, double> central_interval(const PredictiveDensity& d, double level) {
  detail::require(level > 0.0 && level < 1.0, "level", "must lie in (0, 1)");
  return {density_quantile(d, (1.0 - level) / 2.0), density_quantile(d, (1.0 + level) / 2.0)};
}

/// PIT values and central-interval coverage of given densities against truths.
inline CalibrationReport score_calibration(std::span<const PredictiveDensity> densities,
                                           std::span<const double> truths,
                                           std::span<const double> levels = default_coverage_levels()) {
  detail::require(densities.size() == truths.size(), "truths", "need one truth per density");
  detail::require(!densities.empty(), "test_times", "no test points");
  CalibrationReport report;
  std::vector<std::size_t> hits(levels.size(), 0);
  for (std::size_t i = 0; i < densities.size(); ++i) {
    report.pit_values.push_back(density_cdf(densities[i], truths[i]));
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const auto [lo, hi] = central_interval(densities[i], levels[l]);
      if (lo <= truths[i] && truths[i] <= hi) ++hits[l];
    }
  }
  for (std::size_t l = 0; l < levels.size(); ++l)
    report.coverage[levels[l]] = static_cast<double>(hits[l]) / static_cast<double>(densities.size());
  report.truths.assign(truths.begin(), truths.end());
  return report;
}

/// Out-of-sample calibration: each test time is forecast from its own past.
inline CalibrationReport evaluate_calibration(const MultiSeries& series, const PartitionEnsemble& ensemble,
                                              std::span<const std::size_t> test_times, const EnsembleConfig& config,
                                              std::span<const double> levels = default_coverage_levels()) {
  detail::validate_ensemble(ensemble, config);
  detail::require(!test_times.empty(), "test_times", "no test times");
  const auto& first = ensemble.specs.front();
  std::size_t spacing = series.length();
  for (std::size_t i = 0; i < test_times.size(); ++i) {
    if (i > 0) {
      detail::require(test_times[i] > test_times[i - 1], "test_times", "must be strictly increasing");
      spacing = std::min(spacing, test_times[i] - test_times[i - 1]);
    }
    detail::require(test_times[i] + first.horizon < series.length(), "test_times",
                    "time " + std::to_string(test_times[i]) + " has no realised target");
  }

  std::vector<PredictiveDensity> densities;
  std::vector<double> truths;
  for (std::size_t t : test_times) {
    densities.push_back(ensemble_predict(series, ensemble, t, config));
    truths.push_back(series.values(t + first.horizon, first.target));
  }
  CalibrationReport report = score_calibration(densities, truths, levels);
  report.test_times.assign(test_times.begin(), test_times.end());
  report.min_spacing = test_times.size() > 1 ? spacing : 0;
  return report;
}

}  // namespace chaospred
