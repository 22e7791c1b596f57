#pragma once

// Command-line front end. Every subcommand validates its whole configuration
// before doing work, writes its artifacts under --out, and embeds the
// resolved configuration and seed in each JSON artifact.
//
// Exit status: 0 success, 2 invalid configuration or input, 1 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chaospred.hpp"

namespace chaospred::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInvalid = 2;

// ---------------------------------------------------------------------------
// Parsing helpers

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  if (detail::trim(text).empty()) return out;
  for (auto part : detail::split(text, ',')) out.emplace_back(detail::trim(part));
  return out;
}

inline std::vector<double> parse_doubles(const std::string& text, const char* field) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) out.push_back(detail::parse_double(s, field));
  return out;
}

inline std::size_t parse_size(std::string_view text, const char* field) {
  text = detail::trim(text);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError(field, "cannot parse '" + std::string(text) + "' as a non-negative integer");
  return v;
}

inline std::vector<std::size_t> parse_sizes(const std::string& text, const char* field) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(text)) out.push_back(parse_size(s, field));
  return out;
}

/// Observable by name, or by column number when no name matches.
inline std::size_t resolve_observable(const std::string& token, const std::vector<std::string>& names,
                                      const char* field) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == token) return i;
  const std::size_t i = parse_size(token, field);
  detail::require(i < names.size(), field, "unknown observable '" + token + "'");
  return i;
}

/// "x:0,x:1,y:2" -> (observable, lag) pairs.
inline std::vector<DelayCoord> parse_coords(const std::string& text, const std::vector<std::string>& names,
                                            const char* field) {
  std::vector<DelayCoord> out;
  for (const auto& item : split_list(text)) {
    const auto colon = item.rfind(':');
    detail::require(colon != std::string::npos, field, "expected observable:lag, got '" + item + "'");
    out.push_back({resolve_observable(item.substr(0, colon), names, field),
                   parse_size(std::string_view(item).substr(colon + 1), field)});
  }
  detail::require(!out.empty(), field, "at least one coordinate is required");
  return out;
}

inline Json json_or_null(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

// ---------------------------------------------------------------------------
// Config file support: entries of a JSON object become --key value tokens
// placed before the command-line tokens, and every option keeps its last
// value, so flags override the file.

inline std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("config", e.what());
  }
  detail::require(j.is_object(), "config", "top level must be an object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    if (key == "config") continue;
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (const auto& v : value) text += (text.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
    } else if (value.is_number() || value.is_boolean()) {
      text = value.dump();
    } else {
      throw ValidationError(key, "unsupported config value");
    }
    tokens.push_back("--" + key);
    tokens.push_back(text);
  }
  return tokens;
}

inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path || args.empty()) return args;
  auto tokens = config_tokens(*path);
  args.insert(args.begin() + 1, tokens.begin(), tokens.end());
  return args;
}

// ---------------------------------------------------------------------------
// Output

struct Output {
  fs::path dir;

  fs::path file(const std::string& name) const { return dir / name; }

  void write_text(const std::string& name, const std::string& text) const {
    fs::create_directories(dir);
    std::ofstream os(file(name), std::ios::binary);
    if (!os) throw Error("cannot write '" + file(name).string() + "'");
    os << text;
  }

  void write_json(const std::string& name, const Json& j) const { write_text(name, j.dump(2) + "\n"); }
};

inline Json envelope(const std::string& command, const Json& config, std::uint64_t seed) {
  Json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config;
  return j;
}

// ---------------------------------------------------------------------------
// Subcommand settings

struct Common {
  std::string out = ".";
  std::uint64_t seed = 0;
  std::string config;
};

struct GenerateArgs {
  std::string system = "logistic";
  std::size_t n = 1000;
  std::optional<double> dt;
  std::optional<std::size_t> transient;
  std::string x0;
  std::optional<double> r, a, b, c, sigma, rho, beta;
};

struct MapArgs {
  std::string input;
  double step = 1.0;
  std::string coords = "0:0,0:1";
  std::string target = "0";
  std::size_t horizon = 1;
};

struct ScheduleArgs {
  double c = 1.0;
  double gamma = 0.5;
  std::optional<std::size_t> k;
  double lambda = kDefaultRidge;
  std::size_t exclusion = 0;
};

struct BoxdimArgs {
  std::string input;
  std::string columns;
  std::string eps;
  double eps_max = 0.5;
  double eps_min = 1.0 / 64.0;
  std::size_t eps_count = 6;
};

struct SelfintersectArgs {
  MapArgs map;
  std::string coords2;
  std::string state_columns;
  double delta = 1.0;
  double epsilon = 0.05;
  ScheduleArgs schedule;
};

struct PredictArgs {
  MapArgs map;
  std::string embedding;
  ScheduleArgs schedule;
  std::optional<std::size_t> test_start;
  std::optional<std::size_t> test_end;
  std::size_t stride = 1;
};

struct EnsembleArgs {
  std::string input;
  double step = 1.0;
  std::string target = "0";
  std::size_t horizon = 1;
  std::string observables;
  std::size_t p = 2;
  std::size_t count = 2;
  std::string mode = "auto";
  std::string lags = "0,1,2,3,4,5,6,7,8,9";
  std::string weights;
  ScheduleArgs schedule;
  std::optional<std::size_t> query_time;
  std::string thresholds;
  // calibrate only
  std::optional<std::size_t> test_start;
  std::size_t test_count = 200;
  std::optional<std::size_t> spacing;
};

inline void add_map_options(CLI::App* sub, MapArgs& m) {
  sub->add_option("--input", m.input, "Series CSV (header row of observable names)");
  sub->add_option("--step", m.step, "Sampling interval recorded for the series")->capture_default_str();
  sub->add_option("--coords", m.coords, "Delay coordinates as observable:lag,...")->capture_default_str();
  sub->add_option("--target", m.target, "Target observable")->capture_default_str();
  sub->add_option("--horizon", m.horizon, "Steps ahead of the row time")->capture_default_str();
}

inline void add_schedule_options(CLI::App* sub, ScheduleArgs& s) {
  sub->add_option("--c", s.c, "Neighbour schedule scale: k = max(2, ceil(c n^gamma))")->capture_default_str();
  sub->add_option("--gamma", s.gamma, "Neighbour schedule exponent in (0,1)")->capture_default_str();
  sub->add_option("--k", s.k, "Fixed neighbour count (overrides the schedule)");
  sub->add_option("--lambda", s.lambda, "Ridge penalty on standardized slopes")->capture_default_str();
  sub->add_option("--exclusion", s.exclusion, "Temporal exclusion window in steps")->capture_default_str();
}

inline Json to_json(const ScheduleArgs& s) {
  return {{"c", s.c},
          {"gamma", s.gamma},
          {"k", s.k ? Json(*s.k) : Json(nullptr)},
          {"lambda", s.lambda},
          {"exclusion", s.exclusion}};
}

inline void validate(const ScheduleArgs& s) {
  detail::require(std::isfinite(s.c) && s.c > 0.0, "c", "must be positive");
  detail::require(std::isfinite(s.gamma) && s.gamma > 0.0 && s.gamma < 1.0, "gamma", "must lie in (0, 1)");
  detail::require(std::isfinite(s.lambda) && s.lambda >= 0.0, "lambda", "must be non-negative");
  if (s.k) detail::require(*s.k >= 1, "k", "must be at least 1");
}

inline MultiSeries load_series(const std::string& path, double step) {
  detail::require(!path.empty(), "input", "an input series file is required");
  detail::require(fs::exists(path), "input", "file '" + path + "' does not exist");
  return read_series_csv_file(path, step);
}

inline DelayMapSpec resolve_map(const MapArgs& m, const std::vector<std::string>& names, const char* coords_field) {
  DelayMapSpec spec{parse_coords(m.coords, names, coords_field), resolve_observable(m.target, names, "target"),
                    m.horizon};
  validate_delay_map(spec);
  return spec;
}

inline Json map_config(const MapArgs& m) {
  return {{"input", m.input}, {"step", m.step}, {"coords", m.coords}, {"target", m.target}, {"horizon", m.horizon}};
}

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_generate(const GenerateArgs& g, const Common& common, std::ostream& out) {
  SystemSpec spec = default_system(parse_system_kind(g.system));
  detail::require(g.n >= 1, "n", "must be at least 1");
  auto set = [&](const char* name, const std::optional<double>& v) {
    if (!v) return;
    detail::require(spec.params.count(name) == 1, name,
                    "not a parameter of " + std::string(to_string(spec.kind)));
    spec.params[name] = *v;
  };
  set("r", g.r);
  set("a", g.a);
  set("b", g.b);
  set("c", g.c);
  set("sigma", g.sigma);
  set("rho", g.rho);
  set("beta", g.beta);
  if (g.dt) {
    detail::require(is_flow(spec.kind), "dt", "only flows take a time step");
    spec.dt = *g.dt;
  }
  if (g.transient) spec.transient = *g.transient;
  if (!g.x0.empty()) spec.x0 = parse_doubles(g.x0, "x0");
  detail::validate_system(spec);

  const MultiSeries series = generate(spec, g.n);
  const Output o{common.out};
  std::ostringstream csv;
  write_series_csv(csv, series);
  o.write_text("series.csv", csv.str());

  Json meta = envelope("generate", {{"system", to_json(spec)}, {"n", g.n}}, common.seed);
  meta["observables"] = series.names;
  meta["rows"] = series.length();
  meta["step"] = series.step;
  o.write_json("series.json", meta);
  out << "generate: " << series.length() << " samples of " << to_string(spec.kind) << " -> "
      << o.file("series.csv").string() << "\n";
  return kExitOk;
}

inline int cmd_embed(const MapArgs& m, const Common& common, std::ostream& out) {
  const MultiSeries series = load_series(m.input, m.step);
  const DelayMapSpec spec = resolve_map(m, series.names, "coords");
  const EmbeddedDataset data = build_embedding(series, spec);

  const Output o{common.out};
  Json j = envelope("embed", map_config(m), common.seed);
  j["observables"] = series.names;
  const Json body = to_json(data, series.names);
  j["spec"] = body["spec"];
  j["rows"] = body["rows"];
  o.write_json("embedding.json", j);

  std::ostringstream csv;
  csv << "t";
  for (std::size_t c = 0; c < spec.dimension(); ++c)
    csv << "," << series.names[spec.coords[c].observable] << "_lag" << spec.coords[c].lag;
  csv << ",y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    csv << data.times[i];
    for (double v : data.row(i)) csv << "," << format_double(v);
    csv << "," << format_double(data.y[i]) << "\n";
  }
  o.write_text("embedding.csv", csv.str());
  out << "embed: " << data.size() << " rows of dimension " << spec.dimension() << " -> "
      << o.file("embedding.json").string() << "\n";
  return kExitOk;
}

inline Matrix select_columns(const MultiSeries& series, const std::string& columns, const char* field) {
  std::vector<std::size_t> cols;
  for (const auto& name : split_list(columns)) cols.push_back(resolve_observable(name, series.names, field));
  if (cols.empty())
    for (std::size_t c = 0; c < series.observables(); ++c) cols.push_back(c);
  Matrix m(series.length(), cols.size());
  for (std::size_t r = 0; r < series.length(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) m(r, c) = series.values(r, cols[c]);
  return m;
}

inline int cmd_boxdim(const BoxdimArgs& b, const Common& common, std::ostream& out) {
  std::vector<double> grid;
  if (!b.eps.empty()) grid = parse_doubles(b.eps, "eps");
  else grid = geometric_grid(b.eps_max, b.eps_min, b.eps_count);
  detail::require(grid.size() >= 2, "eps", "need at least two scales");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    detail::require(grid[i] > 0.0, "eps", "scales must be positive");
    if (i) detail::require(grid[i] < grid[i - 1], "eps", "scales must be strictly decreasing");
  }
  const MultiSeries series = load_series(b.input, 1.0);
  const Matrix points = select_columns(series, b.columns, "columns");
  const BoxDimEstimate est = estimate_box_dimension(points, grid);

  Json j = envelope("boxdim",
                    {{"input", b.input},
                     {"columns", b.columns},
                     {"eps", b.eps},
                     {"eps_max", b.eps_max},
                     {"eps_min", b.eps_min},
                     {"eps_count", b.eps_count}},
                    common.seed);
  j.update(to_json(est));
  j["poor_fit"] = est.poor_fit();
  const Output o{common.out};
  o.write_json("boxdim.json", j);
  out << "boxdim: d = " << shortest_double(est.d) << " (r2 = " << shortest_double(est.r2) << ")"
      << (est.poor_fit() ? " warning: poor fit" : "") << "\n";
  return kExitOk;
}

inline std::vector<std::pair<double, double>> paired_predictions(const EmbeddedDataset& a, const EmbeddedDataset& b,
                                                                 const ScheduleArgs& s) {
  const ForecastOptions opts{s.c, s.gamma, s.k, s.lambda, s.exclusion, false};
  const auto fa = forecast_rows(a, a.times, opts);
  const auto fb = forecast_rows(b, b.times, opts);
  auto value = [](const RowForecast& f) {
    return f.method == PredictionMethod::linear && f.linear_prediction ? *f.linear_prediction : f.mean_prediction;
  };
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < fa.size(); ++i) out.emplace_back(value(fa[i]), value(fb[i]));
  return out;
}

inline int cmd_selfintersect(const SelfintersectArgs& a, const Common& common, std::ostream& out) {
  detail::require(std::isfinite(a.delta) && a.delta > 0.0, "delta", "must be positive");
  detail::require(std::isfinite(a.epsilon) && a.epsilon > 0.0, "epsilon", "must be positive");
  validate(a.schedule);
  const MultiSeries series = load_series(a.map.input, a.map.step);
  const DelayMapSpec spec1 = resolve_map(a.map, series.names, "coords");
  std::optional<DelayMapSpec> spec2;
  if (!a.coords2.empty()) {
    MapArgs second = a.map;
    second.coords = a.coords2;
    spec2 = resolve_map(second, series.names, "coords2");
  }
  const Matrix states = select_columns(series, a.state_columns, "state_columns");

  EmbeddedDataset d1 = build_embedding(series, spec1);
  std::optional<EmbeddedDataset> d2;
  if (spec2) {
    d2 = build_embedding(series, *spec2);
    restrict_to_common_times(d1, *d2);
  }
  auto states_for = [&](const EmbeddedDataset& d) {
    Matrix m(d.size(), states.cols());
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t c = 0; c < states.cols(); ++c) m(i, c) = states(d.times[i], c);
    return m;
  };

  Json config = map_config(a.map);
  config["coords2"] = a.coords2;
  config["state_columns"] = a.state_columns;
  config["delta"] = a.delta;
  config["epsilon"] = a.epsilon;
  config["schedule"] = to_json(a.schedule);
  Json j = envelope("selfintersect", config, common.seed);

  const auto r1 = find_self_intersections(d1, states_for(d1), a.delta, a.epsilon);
  j.update(to_json(r1));
  j["rows"] = r1.rows;
  j["first_time"] = r1.first_time;
  if (d2) {
    const auto r2 = find_self_intersections(*d2, states_for(*d2), a.delta, a.epsilon);
    j["second"] = to_json(r2);
    j["overlap"] = to_json(intersection_overlap(r1, r2));
    j["decomposition"] = to_json(exhibit1_decomposition(r1, r2, paired_predictions(d1, *d2, a.schedule)));
  }
  const Output o{common.out};
  o.write_json("selfintersect.json", j);
  out << "selfintersect: fraction = " << shortest_double(r1.fraction) << " over " << r1.rows << " rows\n";
  return kExitOk;
}

inline Json to_json(const RowForecast& f) {
  return {{"time", f.time},
          {"truth", f.truth},
          {"mean_prediction", f.mean_prediction},
          {"linear_prediction", json_or_null(f.linear_prediction)},
          {"method", std::string(to_string(f.method))},
          {"neighbors", f.neighbors},
          {"residuals",
           {{"count", f.residuals.count},
            {"mean", f.residuals.mean},
            {"sd", f.residuals.sd},
            {"min", f.residuals.min},
            {"max", f.residuals.max}}}};
}

/// Query times for `predict`: rows in [start, end) every `stride` steps. By
/// default the last fifth of the rows.
inline std::vector<std::size_t> select_test_times(const EmbeddedDataset& data, std::optional<std::size_t> start,
                                                  std::optional<std::size_t> end, std::size_t stride) {
  detail::require(stride >= 1, "stride", "must be at least 1");
  detail::require(data.size() >= 2, "input", "too few rows to forecast");
  const std::size_t lo = start.value_or(data.times[data.size() * 4 / 5]);
  const std::size_t hi = end.value_or(data.times.back() + 1);
  detail::require(lo < hi, "test_start", "must precede test_end");
  std::vector<std::size_t> times;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t t = data.times[i];
    if (t >= lo && t < hi && (t - lo) % stride == 0) times.push_back(t);
  }
  detail::require(!times.empty(), "test_start", "no rows in the test range");
  detail::require(times.front() >= data.times.front() + data.spec.horizon, "test_start",
                  "first test time has no earlier training rows");
  return times;
}

inline Json predictions_json(const EmbeddedDataset& data, const std::vector<std::size_t>& times,
                             const ScheduleArgs& s) {
  const ForecastOptions opts{s.c, s.gamma, s.k, s.lambda, s.exclusion, true};
  Json rows = Json::array();
  for (const auto& f : forecast_rows(data, times, opts)) rows.push_back(to_json(f));
  return rows;
}

inline int cmd_predict(const PredictArgs& a, const Common& common, std::ostream& out) {
  validate(a.schedule);
  EmbeddedDataset data;
  std::vector<std::string> names;
  if (!a.embedding.empty()) {
    detail::require(fs::exists(a.embedding), "embedding", "file '" + a.embedding + "' does not exist");
    std::ifstream in(a.embedding);
    Json j;
    try {
      j = Json::parse(in);
      names = j.at("observables").get<std::vector<std::string>>();
      data = embedding_from_json(j, names);
    } catch (const Json::exception& e) {
      throw ValidationError("embedding", e.what());
    }
  } else {
    const MultiSeries series = load_series(a.map.input, a.map.step);
    names = series.names;
    data = build_embedding(series, resolve_map(a.map, names, "coords"));
  }
  const auto times = select_test_times(data, a.test_start, a.test_end, a.stride);

  Json config = a.embedding.empty() ? map_config(a.map) : Json{{"embedding", a.embedding}};
  config["schedule"] = to_json(a.schedule);
  config["test_start"] = times.front();
  config["test_end"] = a.test_end ? Json(*a.test_end) : Json(data.times.back() + 1);
  config["stride"] = a.stride;
  Json j = envelope("predict", config, common.seed);
  j["spec"] = to_json(data.spec, names);
  j["predictions"] = predictions_json(data, times, a.schedule);
  const Output o{common.out};
  o.write_json("predictions.json", j);
  out << "predict: " << times.size() << " forecasts -> " << o.file("predictions.json").string() << "\n";
  return kExitOk;
}

struct ResolvedEnsemble {
  MultiSeries series;  // restricted to the chosen observables
  PartitionEnsemble ensemble;
  EnsembleConfig config;
};

inline ResolvedEnsemble resolve_ensemble(const EnsembleArgs& a, const Common& common) {
  validate(a.schedule);
  detail::require(!a.schedule.k, "k", "ensembles use the neighbour schedule; drop --k");
  detail::require(a.p >= 1, "p", "must be at least 1");
  detail::require(a.count >= 1, "count", "must be at least 1");
  const auto lags = parse_sizes(a.lags, "lags");
  const auto weights = parse_doubles(a.weights, "weights");
  if (a.mode != "auto") parse_partition_mode(a.mode);
  const MultiSeries full = load_series(a.input, a.step);

  std::vector<std::size_t> cols;
  for (const auto& n : split_list(a.observables)) cols.push_back(resolve_observable(n, full.names, "observables"));
  if (cols.empty())
    for (std::size_t c = 0; c < full.observables(); ++c) cols.push_back(c);
  MultiSeries series{{}, Matrix(full.length(), cols.size()), full.step};
  for (std::size_t c = 0; c < cols.size(); ++c) {
    series.names.push_back(full.names[cols[c]]);
    for (std::size_t r = 0; r < full.length(); ++r) series.values(r, c) = full.values(r, cols[c]);
  }

  const std::size_t K = series.observables();
  const PartitionMode mode = a.mode == "auto" ? default_partition_mode(K, a.p, a.count) : parse_partition_mode(a.mode);
  const PartitionOptions popts{resolve_observable(a.target, series.names, "target"), a.horizon, lags};
  ResolvedEnsemble r{series, make_partitions(K, a.p, a.count, common.seed, mode, popts),
                     EnsembleConfig{a.schedule.c, a.schedule.gamma, a.schedule.lambda, a.schedule.exclusion, weights}};
  detail::validate_ensemble(r.ensemble, r.config);
  return r;
}

inline Json ensemble_config(const EnsembleArgs& a) {
  return {{"input", a.input},       {"step", a.step},        {"target", a.target}, {"horizon", a.horizon},
          {"observables", a.observables}, {"p", a.p},       {"count", a.count},   {"mode", a.mode},
          {"lags", a.lags},         {"weights", a.weights},  {"schedule", to_json(a.schedule)}};
}

inline const std::vector<double>& report_quantiles() {
  static const std::vector<double> q{0.05, 0.25, 0.5, 0.75, 0.95};
  return q;
}

inline int cmd_ensemble(const EnsembleArgs& a, const Common& common, std::ostream& out) {
  const auto thresholds = parse_doubles(a.thresholds, "thresholds");
  const ResolvedEnsemble r = resolve_ensemble(a, common);
  const std::size_t h = r.ensemble.specs.front().horizon;
  const std::size_t target = r.ensemble.specs.front().target;
  const std::size_t qt = a.query_time.value_or(r.series.length() - 1);
  detail::require(qt < r.series.length(), "query_time", "beyond the end of the series");

  const PredictiveDensity d = ensemble_predict(r.series, r.ensemble, qt, r.config);

  Json config = ensemble_config(a);
  config["query_time"] = qt;
  config["thresholds"] = a.thresholds;
  Json j = envelope("ensemble", config, common.seed);
  j["partitions"] = to_json(r.ensemble, r.series.names);
  j["query_time"] = qt;
  j["truth"] = qt + h < r.series.length() ? Json(r.series.values(qt + h, target)) : Json(nullptr);
  j["components"] = to_json(d)["components"];
  Json quantiles = Json::object();
  for (double q : report_quantiles()) quantiles[shortest_double(q)] = density_quantile(d, q);
  j["quantiles"] = quantiles;
  Json tails = Json::array();
  for (double t : thresholds) tails.push_back({{"threshold", t}, {"probability", tail_probability(d, t)}});
  j["tail_probabilities"] = tails;

  const Output o{common.out};
  o.write_json("ensemble.json", j);
  out << "ensemble: " << d.components.size() << " components, median " << shortest_double(density_quantile(d, 0.5))
      << " -> " << o.file("ensemble.json").string() << "\n";
  return kExitOk;
}

inline int cmd_calibrate(const EnsembleArgs& a, const Common& common, std::ostream& out) {
  detail::require(a.test_count >= 1, "test_count", "must be at least 1");
  const ResolvedEnsemble r = resolve_ensemble(a, common);
  const std::size_t h = r.ensemble.specs.front().horizon;
  const std::size_t spacing = a.spacing.value_or(std::max<std::size_t>(1, a.schedule.exclusion));
  detail::require(spacing >= 1, "spacing", "must be at least 1");
  const std::size_t n = r.series.length();
  const std::size_t span = (a.test_count - 1) * spacing + h + 1;
  detail::require(span < n, "test_count", "series too short for the requested test times");
  const std::size_t start = a.test_start.value_or(n - span);
  std::vector<std::size_t> times;
  for (std::size_t i = 0; i < a.test_count; ++i) times.push_back(start + i * spacing);
  detail::require(times.back() + h < n, "test_start", "test times run past the end of the series");

  const CalibrationReport report = evaluate_calibration(r.series, r.ensemble, times, r.config);

  Json config = ensemble_config(a);
  config["test_start"] = start;
  config["test_count"] = a.test_count;
  config["spacing"] = spacing;
  Json j = envelope("calibrate", config, common.seed);
  j["partitions"] = to_json(r.ensemble, r.series.names);
  j.update(to_json(report));

  std::ostringstream csv;
  csv << "time,pit,truth\n";
  for (std::size_t i = 0; i < report.pit_values.size(); ++i)
    csv << report.test_times[i] << "," << format_double(report.pit_values[i]) << ","
        << format_double(report.truths[i]) << "\n";

  const Output o{common.out};
  o.write_json("calibration.json", j);
  o.write_text("pit.csv", csv.str());
  out << "calibrate: " << times.size() << " test times, 90% coverage " << shortest_double(report.coverage.at(0.9))
      << " -> " << o.file("calibration.json").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON file of option values (flags override it)");
  sub->add_option("--seed", c.seed, "Seed for every random draw")->capture_default_str();
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
}

inline void add_ensemble_options(CLI::App* sub, EnsembleArgs& e) {
  sub->add_option("--input", e.input, "Series CSV");
  sub->add_option("--step", e.step, "Sampling interval recorded for the series")->capture_default_str();
  sub->add_option("--target", e.target, "Target observable")->capture_default_str();
  sub->add_option("--horizon", e.horizon, "Forecast horizon in steps")->capture_default_str();
  sub->add_option("--observables", e.observables, "Observables to draw from (default all)");
  sub->add_option("--p", e.p, "Coordinates per delay map")->capture_default_str();
  sub->add_option("--count", e.count, "Number of delay maps")->capture_default_str();
  sub->add_option("--mode", e.mode, "auto, strict or coordinate-disjoint")->capture_default_str();
  sub->add_option("--lags", e.lags, "Lag pool")->capture_default_str();
  sub->add_option("--weights", e.weights, "Component weights (default equal)");
  add_schedule_options(sub, e.schedule);
}

/// Runs one subcommand. `args` excludes the program name.
inline int run_command(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Nearest-neighbour forecasting of chaotic time series", "chaospred"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Common common;
  GenerateArgs gen;
  MapArgs embed;
  BoxdimArgs box;
  SelfintersectArgs self;
  self.map.coords = "0:0";
  PredictArgs pred;
  EnsembleArgs ens, cal;

  auto* g = app.add_subcommand("generate", "Simulate a benchmark system and write series.csv");
  add_common(g, common);
  g->add_option("--system", gen.system, "logistic, henon, lorenz or rossler")->capture_default_str();
  g->add_option("--n", gen.n, "Samples to emit after the transient")->capture_default_str();
  g->add_option("--dt", gen.dt, "Integration step (flows)");
  g->add_option("--transient", gen.transient, "Burn-in steps");
  g->add_option("--x0", gen.x0, "Initial state, comma separated");
  for (auto [name, slot] : {std::pair{"--r", &gen.r}, {"--a", &gen.a}, {"--b", &gen.b}, {"--c", &gen.c},
                            {"--sigma", &gen.sigma}, {"--rho", &gen.rho}, {"--beta", &gen.beta}})
    g->add_option(name, *slot, "System parameter");

  auto* e = app.add_subcommand("embed", "Build a delay-coordinate dataset");
  add_common(e, common);
  add_map_options(e, embed);

  auto* b = app.add_subcommand("boxdim", "Box-counting dimension of a point cloud");
  add_common(b, common);
  b->add_option("--input", box.input, "Series CSV; each row is a point");
  b->add_option("--columns", box.columns, "Columns to use (default all)");
  b->add_option("--eps", box.eps, "Explicit decreasing box sides, comma separated");
  b->add_option("--eps-max", box.eps_max, "Largest box side")->capture_default_str();
  b->add_option("--eps-min", box.eps_min, "Smallest box side")->capture_default_str();
  b->add_option("--eps-count", box.eps_count, "Number of geometric scales")->capture_default_str();

  auto* s = app.add_subcommand("selfintersect", "Delta-distant self-intersections of a delay map");
  add_common(s, common);
  add_map_options(s, self.map);
  s->add_option("--coords2", self.coords2, "Second delay map for overlap and decomposition");
  s->add_option("--state-columns", self.state_columns, "Columns forming the reference state (default all)");
  s->add_option("--delta", self.delta, "State-space separation threshold")->capture_default_str();
  s->add_option("--epsilon", self.epsilon, "Image-space proximity tolerance")->capture_default_str();
  add_schedule_options(s, self.schedule);

  auto* p = app.add_subcommand("predict", "Local mean and local linear forecasts");
  add_common(p, common);
  add_map_options(p, pred.map);
  p->add_option("--embedding", pred.embedding, "embedding.json from `embed` (instead of --input)");
  add_schedule_options(p, pred.schedule);
  p->add_option("--test-start", pred.test_start, "First query time");
  p->add_option("--test-end", pred.test_end, "One past the last query time");
  p->add_option("--stride", pred.stride, "Step between query times")->capture_default_str();

  auto* en = app.add_subcommand("ensemble", "Multiview predictive density at one query time");
  add_common(en, common);
  add_ensemble_options(en, ens);
  en->add_option("--query-time", ens.query_time, "Time of the last visible sample (default: last)");
  en->add_option("--thresholds", ens.thresholds, "Thresholds for tail probabilities");

  auto* c = app.add_subcommand("calibrate", "PIT and interval coverage over spaced test times");
  add_common(c, common);
  add_ensemble_options(c, cal);
  c->add_option("--test-start", cal.test_start, "First test time (default: as late as fits)");
  c->add_option("--test-count", cal.test_count, "Number of test times")->capture_default_str();
  c->add_option("--spacing", cal.spacing, "Gap between test times (default: exclusion window)");

  try {
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (*g) return cmd_generate(gen, common, out);
    if (*e) return cmd_embed(embed, common, out);
    if (*b) return cmd_boxdim(box, common, out);
    if (*s) return cmd_selfintersect(self, common, out);
    if (*p) return cmd_predict(pred, common, out);
    if (*en) return cmd_ensemble(ens, common, out);
    if (*c) return cmd_calibrate(cal, common, out);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInvalid;
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitInvalid;
}

}  // namespace chaospred::cli
