#pragma once

// CSV for series and matrices (header row, 17 significant digits), JSON for
// reports. JSON objects keep insertion order so output is stable.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "embedding.hpp"
#include "ensemble.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "systems.hpp"

namespace chaospred {

using Json = nlohmann::ordered_json;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Shortest text that reads back to the same double.
inline std::string shortest_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

inline void write_series_csv(std::ostream& os, const MultiSeries& s) {
  for (std::size_t c = 0; c < s.names.size(); ++c) os << (c ? "," : "") << s.names[c];
  os << '\n';
  for (std::size_t r = 0; r < s.length(); ++r) {
    for (std::size_t c = 0; c < s.observables(); ++c) os << (c ? "," : "") << format_double(s.values(r, c));
    os << '\n';
  }
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view text, const char* field) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError(field, "cannot parse '" + std::string(text) + "' as a number");
  return v;
}

}  // namespace detail

inline MultiSeries read_series_csv(std::istream& is, double step = 1.0) {
  MultiSeries s;
  s.step = step;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto cells = detail::split(body, ',');
    if (s.names.empty()) {
      for (auto c : cells) s.names.emplace_back(detail::trim(c));
      s.values = Matrix(0, s.names.size());
      continue;
    }
    if (cells.size() != s.names.size())
      throw ValidationError("input", "line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                         " fields, expected " + std::to_string(s.names.size()));
    std::vector<double> row;
    for (auto c : cells) row.push_back(detail::parse_double(c, "input"));
    s.values.append_row(row);
  }
  detail::require(!s.names.empty(), "input", "missing header row");
  validate_series(s);
  return s;
}

inline MultiSeries read_series_csv_file(const std::string& path, double step = 1.0) {
  std::ifstream in(path);
  if (!in) throw ValidationError("input", "cannot open '" + path + "'");
  return read_series_csv(in, step);
}

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(const SystemSpec& s) {
  Json params = Json::object();
  for (const auto& [k, v] : s.params) params[k] = v;
  Json j;
  j["kind"] = std::string(to_string(s.kind));
  j["params"] = params;
  if (is_flow(s.kind)) j["dt"] = s.dt;
  j["transient"] = s.transient;
  j["x0"] = s.x0;
  return j;
}

inline Json to_json(const DelayMapSpec& spec, const std::vector<std::string>& names = {}) {
  auto name = [&](std::size_t i) { return i < names.size() ? Json(names[i]) : Json(i); };
  Json coords = Json::array();
  for (const auto& c : spec.coords) coords.push_back({{"observable", name(c.observable)}, {"lag", c.lag}});
  return {{"coords", coords}, {"target", name(spec.target)}, {"horizon", spec.horizon}, {"p", spec.dimension()}};
}

inline DelayMapSpec delay_map_from_json(const Json& j, const std::vector<std::string>& names) {
  auto id = [&](const Json& v, const char* field) -> std::size_t {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    const auto s = v.get<std::string>();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == s) return i;
    throw ValidationError(field, "unknown observable '" + s + "'");
  };
  DelayMapSpec spec;
  for (const auto& c : j.at("coords")) spec.coords.push_back({id(c.at("observable"), "coords"), c.at("lag").get<std::size_t>()});
  spec.target = id(j.at("target"), "target");
  spec.horizon = j.at("horizon").get<std::size_t>();
  return spec;
}

inline Json to_json(const EmbeddedDataset& d, const std::vector<std::string>& names = {}) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = d.row(i);
    rows.push_back({{"x", std::vector<double>(r.begin(), r.end())}, {"y", d.y[i]}, {"t", d.times[i]}});
  }
  return {{"rows", rows}, {"spec", to_json(d.spec, names)}};
}

inline EmbeddedDataset embedding_from_json(const Json& j, const std::vector<std::string>& names = {}) {
  EmbeddedDataset d;
  d.spec = delay_map_from_json(j.at("spec"), names);
  validate_delay_map(d.spec);
  d.x = Matrix(0, d.spec.dimension());
  for (const auto& r : j.at("rows")) {
    const auto x = r.at("x").get<std::vector<double>>();
    detail::require(x.size() == d.spec.dimension(), "embedding", "row width does not match p");
    d.x.append_row(x);
    d.y.push_back(r.at("y").get<double>());
    d.times.push_back(r.at("t").get<std::size_t>());
  }
  return d;
}

inline Json to_json(const PartitionEnsemble& e, const std::vector<std::string>& names = {}) {
  Json specs = Json::array();
  for (const auto& s : e.specs) specs.push_back(to_json(s, names));
  return {{"specs", specs}, {"mode", std::string(to_string(e.mode))}, {"seed", e.seed}};
}

inline Json to_json(const BoxDimEstimate& b) {
  return {{"eps_grid", b.eps_grid}, {"counts", b.counts}, {"d", b.d}, {"r2", b.r2}};
}

inline Json to_json(const SelfIntersectionReport& r) {
  return {{"delta", r.delta}, {"epsilon", r.epsilon}, {"flagged", r.flagged}, {"fraction", r.fraction}};
}

inline Json to_json(const OverlapRecord& o) {
  return {{"overlap", o.overlap}, {"fraction1", o.fraction1}, {"fraction2", o.fraction2}, {"shared", o.shared},
          {"rows", o.rows}};
}

inline Json to_json(const Exhibit1Report& e) {
  Json pairs = Json::array();
  for (const auto& [a, b] : e.paired_predictions) pairs.push_back({a, b});
  return {{"S1", e.S1}, {"S2", e.S2}, {"S3", e.S3}, {"S4", e.S4}, {"paired_predictions", pairs}};
}

inline Json to_json(const PredictiveDensity& d) {
  Json comps = Json::array();
  for (const auto& c : d.components) comps.push_back({{"mu", c.mu}, {"residual_sample", c.residuals}, {"weight", c.weight}});
  return {{"components", comps}};
}

inline Json to_json(const CalibrationReport& r) {
  Json coverage = Json::object();
  for (const auto& [level, value] : r.coverage) coverage[shortest_double(level)] = value;
  return {{"pit_values", r.pit_values}, {"coverage", coverage}, {"test_times", r.test_times},
          {"truths", r.truths},         {"min_spacing", r.min_spacing}};
}

}  // namespace chaospred
