#pragma once

// Benchmark chaotic dynamics: two maps iterated directly and two flows
// sampled with fixed-step classical RK4.

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace chaospred {

enum class SystemKind { logistic, henon, lorenz, rossler };

inline std::string_view to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::logistic: return "logistic";
    case SystemKind::henon: return "henon";
    case SystemKind::lorenz: return "lorenz";
    case SystemKind::rossler: return "rossler";
  }
  return "unknown";
}

inline SystemKind parse_system_kind(std::string_view name) {
  if (name == "logistic") return SystemKind::logistic;
  if (name == "henon") return SystemKind::henon;
  if (name == "lorenz") return SystemKind::lorenz;
  if (name == "rossler") return SystemKind::rossler;
  throw ValidationError("system", "unknown system '" + std::string(name) + "'");
}

inline bool is_flow(SystemKind kind) {
  return kind == SystemKind::lorenz || kind == SystemKind::rossler;
}

inline std::size_t state_dimension(SystemKind kind) {
  switch (kind) {
    case SystemKind::logistic: return 1;
    case SystemKind::henon: return 2;
    default: return 3;
  }
}

struct SystemSpec {
  SystemKind kind = SystemKind::logistic;
  std::map<std::string, double> params;
  double dt = 0.0;  // flows only
  std::size_t transient = 0;
  std::vector<double> x0;
};

/// Canonical chaotic regime for each system.
inline SystemSpec default_system(SystemKind kind) {
  switch (kind) {
    case SystemKind::logistic:
      return {kind, {{"r", 3.9}}, 0.0, 100, {0.4}};
    case SystemKind::henon:
      return {kind, {{"a", 1.4}, {"b", 0.3}}, 0.0, 100, {0.0, 0.0}};
    case SystemKind::lorenz:
      return {kind, {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}}, 0.01, 1000, {1.0, 1.0, 1.0}};
    case SystemKind::rossler:
      return {kind, {{"a", 0.2}, {"b", 0.2}, {"c", 5.7}}, 0.05, 1000, {1.0, 1.0, 1.0}};
  }
  return {};
}

inline std::vector<std::string> observable_names(SystemKind kind) {
  switch (kind) {
    case SystemKind::logistic: return {"x"};
    case SystemKind::henon: return {"x", "y"};
    default: return {"x", "y", "z"};
  }
}

/// K aligned, uniformly sampled observables (n x K).
struct MultiSeries {
  std::vector<std::string> names;
  Matrix values;
  double step = 1.0;

  [[nodiscard]] std::size_t length() const noexcept { return values.rows(); }
  [[nodiscard]] std::size_t observables() const noexcept { return values.cols(); }

  [[nodiscard]] std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw ValidationError("observable", "unknown observable '" + std::string(name) + "'");
  }

  /// First `n` samples; used to guarantee nothing past a cut-off is visible.
  [[nodiscard]] MultiSeries head(std::size_t n) const { return {names, values.head(n), step}; }

  friend bool operator==(const MultiSeries&, const MultiSeries&) = default;
};

/// Throws ValidationError unless every sample is finite and names match columns.
inline void validate_series(const MultiSeries& s) {
  detail::require(s.names.size() == s.values.cols(), "series",
                  "name count does not match column count");
  for (double v : s.values.data())
    detail::require(std::isfinite(v), "series", "non-finite sample");
}

namespace detail {

constexpr double kDivergenceBound = 1e6;

inline double param(const SystemSpec& spec, const char* name) {
  auto it = spec.params.find(name);
  if (it == spec.params.end()) {
    const auto defaults = default_system(spec.kind).params;
    auto d = defaults.find(name);
    return d->second;
  }
  return it->second;
}

inline void validate_system(const SystemSpec& spec) {
  const auto known = default_system(spec.kind).params;
  for (const auto& [name, value] : spec.params) {
    require(known.count(name) == 1, "params",
            "'" + name + "' is not a parameter of " + std::string(to_string(spec.kind)));
    require(std::isfinite(value), "params", "'" + name + "' must be finite");
  }
  require(spec.x0.size() == state_dimension(spec.kind), "x0",
          "expected " + std::to_string(state_dimension(spec.kind)) + " components");
  for (double v : spec.x0) require(std::isfinite(v), "x0", "components must be finite");
  if (is_flow(spec.kind))
    require(std::isfinite(spec.dt) && spec.dt > 0.0, "dt", "must be positive for flows");
}

template <std::size_t D>
void check_bounded(const std::array<double, D>& s, std::size_t step) {
  for (double v : s)
    if (!std::isfinite(v) || std::abs(v) > kDivergenceBound) throw DivergenceError(step);
}

template <std::size_t D, typename Step>
MultiSeries run_orbit(const SystemSpec& spec, std::size_t n, double sample_step, Step&& advance) {
  std::array<double, D> state{};
  for (std::size_t i = 0; i < D; ++i) state[i] = spec.x0[i];
  check_bounded(state, 0);
  std::size_t step = 0;
  for (; step < spec.transient; ++step) {
    advance(state);
    check_bounded(state, step + 1);
  }
  MultiSeries out{observable_names(spec.kind), Matrix(n, D), sample_step};
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      advance(state);
      check_bounded(state, ++step);
    }
    for (std::size_t c = 0; c < D; ++c) out.values(i, c) = state[c];
  }
  return out;
}

template <typename Field>
void rk4_step(std::array<double, 3>& s, double dt, Field&& f) {
  using S = std::array<double, 3>;
  auto axpy = [](const S& x, double a, const S& k) {
    return S{x[0] + a * k[0], x[1] + a * k[1], x[2] + a * k[2]};
  };
  const S k1 = f(s);
  const S k2 = f(axpy(s, dt / 2, k1));
  const S k3 = f(axpy(s, dt / 2, k2));
  const S k4 = f(axpy(s, dt, k3));
  for (int i = 0; i < 3; ++i) s[i] += dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
}

}  // namespace detail

/// n post-transient states of the logistic or Henon map. The first returned
/// state is the one reached after `transient` iterations of x0.
inline MultiSeries iterate_map(const SystemSpec& spec, std::size_t n) {
  detail::require(!is_flow(spec.kind), "system", "iterate_map needs a map (logistic or henon)");
  detail::require(n >= 1, "n", "must be at least 1");
  detail::validate_system(spec);
  if (spec.kind == SystemKind::logistic) {
    const double r = detail::param(spec, "r");
    return detail::run_orbit<1>(spec, n, 1.0, [r](std::array<double, 1>& s) {
      s[0] = r * s[0] * (1.0 - s[0]);
    });
  }
  const double a = detail::param(spec, "a");
  const double b = detail::param(spec, "b");
  return detail::run_orbit<2>(spec, n, 1.0, [a, b](std::array<double, 2>& s) {
    const double x = s[0];
    s[0] = 1.0 - a * x * x + s[1];
    s[1] = b * x;
  });
}

/// n post-transient samples of the Lorenz or Rossler flow, spaced dt apart.
inline MultiSeries integrate_flow(const SystemSpec& spec, std::size_t n) {
  detail::require(is_flow(spec.kind), "system", "integrate_flow needs a flow (lorenz or rossler)");
  detail::require(n >= 1, "n", "must be at least 1");
  detail::validate_system(spec);
  using S = std::array<double, 3>;
  const double dt = spec.dt;
  if (spec.kind == SystemKind::lorenz) {
    const double sigma = detail::param(spec, "sigma");
    const double rho = detail::param(spec, "rho");
    const double beta = detail::param(spec, "beta");
    auto field = [=](const S& v) {
      return S{sigma * (v[1] - v[0]), v[0] * (rho - v[2]) - v[1], v[0] * v[1] - beta * v[2]};
    };
    return detail::run_orbit<3>(spec, n, dt, [&](S& s) { detail::rk4_step(s, dt, field); });
  }
  const double a = detail::param(spec, "a");
  const double b = detail::param(spec, "b");
  const double c = detail::param(spec, "c");
  auto field = [=](const S& v) {
    return S{-v[1] - v[2], v[0] + a * v[1], b + v[2] * (v[0] - c)};
  };
  return detail::run_orbit<3>(spec, n, dt, [&](S& s) { detail::rk4_step(s, dt, field); });
}

/// Dispatches to iterate_map or integrate_flow.
inline MultiSeries generate(const SystemSpec& spec, std::size_t n) {
  return is_flow(spec.kind) ? integrate_flow(spec, n) : iterate_map(spec, n);
}

}  // namespace chaospred
