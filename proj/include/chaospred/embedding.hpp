#pragma once

// General delay coordinate maps: each coordinate is one observable read at a
// lag behind the row time, and the target is one observable read `horizon`
// steps ahead of it.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "random.hpp"
#include "systems.hpp"

namespace chaospred {

struct DelayCoord {
  std::size_t observable = 0;
  std::size_t lag = 0;

  friend auto operator<=>(const DelayCoord&, const DelayCoord&) = default;
};

struct DelayMapSpec {
  std::vector<DelayCoord> coords;
  std::size_t target = 0;
  std::size_t horizon = 1;

  [[nodiscard]] std::size_t dimension() const noexcept { return coords.size(); }

  [[nodiscard]] std::size_t max_lag() const noexcept {
    std::size_t m = 0;
    for (const auto& c : coords) m = std::max(m, c.lag);
    return m;
  }

  friend bool operator==(const DelayMapSpec&, const DelayMapSpec&) = default;
};

inline void validate_delay_map(const DelayMapSpec& spec) {
  detail::require(!spec.coords.empty(), "coords", "a delay map needs at least one coordinate");
  detail::require(spec.horizon >= 1, "horizon", "must be at least 1");
  std::set<DelayCoord> seen(spec.coords.begin(), spec.coords.end());
  detail::require(seen.size() == spec.coords.size(), "coords", "coordinates must be pairwise distinct");
}

/// Delay vectors x_t paired with the forward target y_t = target(t + horizon).
struct EmbeddedDataset {
  DelayMapSpec spec;
  Matrix x;                        // rows x p
  std::vector<double> y;
  std::vector<std::size_t> times;  // ascending

  [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
  [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept { return x.row(i); }

  friend bool operator==(const EmbeddedDataset&, const EmbeddedDataset&) = default;
};

/// Delay vector of `spec` at time `t` (needs t >= max lag). Reads nothing after t.
inline std::vector<double> delay_vector(const MultiSeries& series, const DelayMapSpec& spec,
                                        std::size_t t) {
  detail::require(t >= spec.max_lag() && t < series.length(), "query_time",
                  "time " + std::to_string(t) + " has no complete delay vector");
  std::vector<double> v(spec.dimension());
  for (std::size_t j = 0; j < v.size(); ++j)
    v[j] = series.values(t - spec.coords[j].lag, spec.coords[j].observable);
  return v;
}

inline EmbeddedDataset build_embedding(const MultiSeries& series, const DelayMapSpec& spec) {
  validate_delay_map(spec);
  const std::size_t k = series.observables();
  for (const auto& c : spec.coords)
    detail::require(c.observable < k, "observable",
                    "unknown observable id " + std::to_string(c.observable));
  detail::require(spec.target < k, "target", "unknown observable id " + std::to_string(spec.target));

  const std::size_t n = series.length();
  const std::size_t maxlag = spec.max_lag();
  if (n <= maxlag + spec.horizon)
    throw ValidationError("series", "series too short: length " + std::to_string(n) +
                                        " <= max lag + horizon = " +
                                        std::to_string(maxlag + spec.horizon));

  const std::size_t rows = n - maxlag - spec.horizon;
  EmbeddedDataset out{spec, Matrix(rows, spec.dimension()), std::vector<double>(rows),
                      std::vector<std::size_t>(rows)};
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t t = maxlag + r;
    for (std::size_t j = 0; j < spec.dimension(); ++j)
      out.x(r, j) = series.values(t - spec.coords[j].lag, spec.coords[j].observable);
    out.y[r] = series.values(t + spec.horizon, spec.target);
    out.times[r] = t;
  }
  return out;
}

/// Rows whose time satisfies `keep`, in order.
template <typename Pred>
EmbeddedDataset filter_rows(const EmbeddedDataset& data, Pred&& keep) {
  EmbeddedDataset out{data.spec, Matrix(0, data.spec.dimension()), {}, {}};
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!keep(data.times[i])) continue;
    out.x.append_row(data.row(i));
    out.y.push_back(data.y[i]);
    out.times.push_back(data.times[i]);
  }
  return out;
}

/// Trims two datasets built from the same series to their shared row times so
/// their row indices refer to the same instants.
inline void restrict_to_common_times(EmbeddedDataset& a, EmbeddedDataset& b) {
  if (a.size() == 0 || b.size() == 0) return;
  const std::size_t lo = std::max(a.times.front(), b.times.front());
  const std::size_t hi = std::min(a.times.back(), b.times.back());
  auto in_range = [=](std::size_t t) { return t >= lo && t <= hi; };
  a = filter_rows(a, in_range);
  b = filter_rows(b, in_range);
}

// ---------------------------------------------------------------------------
// Random partitions

enum class PartitionMode {
  strict,              // no observable shared between specs
  coordinate_disjoint  // no (observable, lag) pair shared between specs
};

inline std::string_view to_string(PartitionMode mode) {
  return mode == PartitionMode::strict ? "strict" : "coordinate-disjoint";
}

inline PartitionMode parse_partition_mode(std::string_view name) {
  if (name == "strict") return PartitionMode::strict;
  if (name == "coordinate-disjoint") return PartitionMode::coordinate_disjoint;
  throw ValidationError("mode", "expected strict or coordinate-disjoint, got '" + std::string(name) + "'");
}

/// Strict when there are enough observables for it, coordinate-disjoint otherwise.
inline PartitionMode default_partition_mode(std::size_t K, std::size_t p, std::size_t count) {
  return p * count <= K ? PartitionMode::strict : PartitionMode::coordinate_disjoint;
}

inline std::vector<std::size_t> default_lag_pool() {
  std::vector<std::size_t> pool(10);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  return pool;
}

struct PartitionOptions {
  std::size_t target = 0;
  std::size_t horizon = 1;
  std::vector<std::size_t> lag_pool = default_lag_pool();
};

struct PartitionEnsemble {
  std::vector<DelayMapSpec> specs;
  PartitionMode mode = PartitionMode::strict;
  std::uint64_t seed = 0;

  friend bool operator==(const PartitionEnsemble&, const PartitionEnsemble&) = default;
};

/// `count` random delay maps of dimension p over K observables, pairwise
/// disjoint in the sense of `mode`.
inline PartitionEnsemble make_partitions(std::size_t K, std::size_t p, std::size_t count,
                                         std::uint64_t seed, PartitionMode mode,
                                         const PartitionOptions& opts = {}) {
  detail::require(K >= 1, "K", "must be at least 1");
  detail::require(p >= 1, "p", "must be at least 1");
  detail::require(count >= 1, "count", "must be at least 1");
  detail::require(opts.target < K, "target", "target observable out of range");
  detail::require(opts.horizon >= 1, "horizon", "must be at least 1");
  detail::require(!opts.lag_pool.empty(), "lag_pool", "must not be empty");
  std::vector<std::size_t> pool = opts.lag_pool;
  std::sort(pool.begin(), pool.end());
  detail::require(std::adjacent_find(pool.begin(), pool.end()) == pool.end(), "lag_pool",
                  "lags must be distinct");

  Rng rng(seed);
  PartitionEnsemble out{{}, mode, seed};

  if (mode == PartitionMode::strict) {
    if (p * count > K)
      throw ValidationError("count", "strict partitions infeasible: p*count = " +
                                         std::to_string(p * count) + " > K = " + std::to_string(K));
    detail::require(p <= pool.size(), "p", "exceeds the lag pool size");
    std::vector<std::size_t> obs(K);
    std::iota(obs.begin(), obs.end(), std::size_t{0});
    rng.shuffle(std::span(obs));
    for (std::size_t s = 0; s < count; ++s) {
      std::vector<std::size_t> lags = pool;
      rng.shuffle(std::span(lags));
      DelayMapSpec spec{{}, opts.target, opts.horizon};
      for (std::size_t j = 0; j < p; ++j) spec.coords.push_back({obs[s * p + j], lags[j]});
      std::sort(spec.coords.begin(), spec.coords.end());
      out.specs.push_back(std::move(spec));
    }
    return out;
  }

  const std::size_t available = K * pool.size();
  if (p * count > available)
    throw ValidationError("count", "coordinate-disjoint partitions infeasible: p*count = " +
                                       std::to_string(p * count) + " > K*|lag_pool| = " +
                                       std::to_string(available));
  std::vector<DelayCoord> candidates;
  candidates.reserve(available);
  for (std::size_t o = 0; o < K; ++o)
    for (std::size_t lag : pool) candidates.push_back({o, lag});
  rng.shuffle(std::span(candidates));
  for (std::size_t s = 0; s < count; ++s) {
    DelayMapSpec spec{{candidates.begin() + static_cast<std::ptrdiff_t>(s * p),
                       candidates.begin() + static_cast<std::ptrdiff_t>((s + 1) * p)},
                      opts.target, opts.horizon};
    std::sort(spec.coords.begin(), spec.coords.end());
    out.specs.push_back(std::move(spec));
  }
  return out;
}

}  // namespace chaospred
