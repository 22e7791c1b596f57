#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "chaospred.hpp"
#include "oracles.hpp"

namespace chaospred {
namespace {

Matrix to_matrix(const std::vector<std::vector<double>>& pts) {
  Matrix m;
  for (const auto& p : pts) m.append_row(p);
  return m;
}

std::vector<double> dyadic(int from, int to) {
  std::vector<double> g;
  for (int e = from; e <= to; ++e) g.push_back(std::ldexp(1.0, -e));
  return g;
}

TEST(BoxDimension, RepeatedPointIsZeroDimensional) {
  const std::vector<std::vector<double>> pts(50, {0.3, -1.2});
  const auto est = estimate_box_dimension(to_matrix(pts), dyadic(1, 5));
  for (auto c : est.counts) EXPECT_EQ(c, 1u);
  EXPECT_EQ(est.d, 0.0);
}

TEST(BoxDimension, UniformSegment) {
  Rng rng(3);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 4096; ++i) pts.push_back({rng.uniform(), 0.0});
  const auto grid = dyadic(1, 6);
  const auto est = estimate_box_dimension(to_matrix(pts), grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(est.counts[i], oracle::occupied_cells(pts, grid[i]));
  EXPECT_GE(est.d, 0.9);
  EXPECT_LE(est.d, 1.1);
  EXPECT_NEAR(est.d, 1.0, 0.15);
  EXPECT_GE(est.r2, 0.95);
}

TEST(BoxDimension, HenonAttractor) {
  const auto s = iterate_map(default_system(SystemKind::henon), 100000);
  std::vector<std::vector<double>> pts;
  for (std::size_t i = 0; i < s.length(); ++i) pts.push_back({s.values(i, 0), s.values(i, 1)});
  const auto grid = dyadic(2, 7);
  const auto est = estimate_box_dimension(s.values, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(est.counts[i], oracle::occupied_cells(pts, grid[i]));
  EXPECT_GE(est.d, 1.1);
  EXPECT_LE(est.d, 1.4);
  EXPECT_GE(est.r2, 0.95);
}

TEST(BoxDimension, CountsNonIncreasingInEps) {
  const auto s = integrate_flow(default_system(SystemKind::lorenz), 5000);
  const auto est = estimate_box_dimension(s.values, geometric_grid(20.0, 0.5, 12));
  for (std::size_t i = 1; i < est.counts.size(); ++i) EXPECT_GE(est.counts[i], est.counts[i - 1]);
  EXPECT_GE(est.d, 0.0);
}

TEST(BoxDimension, Errors) {
  const Matrix two = to_matrix({{0.0}, {1.0}});
  EXPECT_THROW(estimate_box_dimension(two, std::vector<double>{0.1}), ValidationError);
  EXPECT_THROW(estimate_box_dimension(two, std::vector<double>{0.1, 0.2}), ValidationError);
  EXPECT_THROW(estimate_box_dimension(two, std::vector<double>{0.1, -0.2}), ValidationError);
  EXPECT_THROW(estimate_box_dimension(to_matrix({{0.0}}), std::vector<double>{0.2, 0.1}), ValidationError);
}

// --- self-intersections

struct Circle {
  MultiSeries series;
  Matrix states;  // aligned with rows of any lag-0, horizon-1 embedding
};

Circle circle(std::size_t n) {
  Circle c;
  c.series.names = {"x", "y"};
  c.series.values = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    c.series.values(i, 0) = std::cos(th);
    c.series.values(i, 1) = std::sin(th);
  }
  c.states = c.series.values.head(n - 1);
  return c;
}

TEST(SelfIntersections, CircleProjectionMatchesPairScan) {
  const auto c = circle(360);
  const auto d = build_embedding(c.series, {{{0, 0}}, 0, 1});
  // delta = radius: mirror partners qualify where |sin| > 1/2, two thirds of the circle
  const auto half = find_self_intersections(d, c.states, 1.0, 0.01);
  EXPECT_EQ(half.flagged, oracle::self_intersections(d, c.states, 1.0, 0.01));
  EXPECT_GT(half.fraction, 0.6);
  EXPECT_LT(half.fraction, 0.7);
  // a tenth of the diameter: nearly every point has a distant mirror partner
  const auto tenth = find_self_intersections(d, c.states, 0.2, 0.01);
  EXPECT_EQ(tenth.flagged, oracle::self_intersections(d, c.states, 0.2, 0.01));
  EXPECT_GT(tenth.fraction, 0.9);
}

TEST(SelfIntersections, InjectiveMapHasNone) {
  const auto c = circle(360);
  const auto d = build_embedding(c.series, {{{0, 0}, {1, 0}}, 0, 1});
  EXPECT_TRUE(find_self_intersections(d, c.states, 1.0, 0.01).flagged.empty());
}

TEST(SelfIntersections, DeltaBeyondDiameter) {
  const auto c = circle(360);
  const auto d = build_embedding(c.series, {{{0, 0}}, 0, 1});
  const auto r = find_self_intersections(d, c.states, 2.5, 0.01);
  EXPECT_TRUE(r.flagged.empty());
  EXPECT_EQ(r.fraction, 0.0);
}

TEST(SelfIntersections, RandomCloudsMatchPairScanAndAreSymmetric) {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    MultiSeries s{{"a", "b", "c"}, Matrix(400, 3), 1.0};
    for (std::size_t i = 0; i < 400; ++i)
      for (std::size_t c = 0; c < 3; ++c) s.values(i, c) = rng.uniform();
    const auto d = build_embedding(s, {{{0, 0}, {1, 0}}, 0, 1});
    const Matrix states = s.values.head(d.size());
    const auto r = find_self_intersections(d, states, 0.5, 0.05);
    EXPECT_EQ(r.flagged, oracle::self_intersections(d, states, 0.5, 0.05));
    EXPECT_GE(r.fraction, 0.0);
    EXPECT_LE(r.fraction, 1.0);
    // every flagged row has a flagged partner satisfying the rule
    for (auto i : r.flagged) {
      bool partner = false;
      for (auto j : r.flagged)
        partner |= j != i && euclidean(d.row(i), d.row(j)) <= 0.05 && euclidean(states.row(i), states.row(j)) > 0.5;
      EXPECT_TRUE(partner) << i;
    }
  }
}

TEST(SelfIntersections, LorenzDelayMapMatchesPairScan) {
  auto spec = default_system(SystemKind::lorenz);
  spec.dt = 0.05;
  const auto s = integrate_flow(spec, 3000);
  const auto d = build_embedding(s, {{{0, 0}, {0, 1}, {0, 2}}, 0, 1});
  Matrix states(d.size(), 3);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) states(i, c) = s.values(d.times[i], c);
  const auto r = find_self_intersections(d, states, 2.0, 0.3);
  EXPECT_EQ(r.flagged, oracle::self_intersections(d, states, 2.0, 0.3));
  EXPECT_FALSE(r.flagged.empty());
}

TEST(SelfIntersections, MisalignedStates) {
  const auto c = circle(100);
  const auto d = build_embedding(c.series, {{{0, 0}}, 0, 1});
  EXPECT_THROW(find_self_intersections(d, c.series.values, 1.0, 0.01), ValidationError);
  EXPECT_THROW(find_self_intersections(d, c.states, 0.0, 0.01), ValidationError);
  EXPECT_THROW(find_self_intersections(d, c.states, 1.0, -1.0), ValidationError);
}

SelfIntersectionReport report(std::vector<std::size_t> flagged, std::size_t n) {
  const double f = static_cast<double>(flagged.size()) / static_cast<double>(n);
  return {1.0, 0.1, std::move(flagged), f, n, 0};
}

TEST(Overlap, SetArithmetic) {
  const auto a = intersection_overlap(report({1, 2}, 10), report({3, 4}, 10));
  EXPECT_EQ(a.overlap, 0.0);
  EXPECT_DOUBLE_EQ(a.fraction1, 0.2);
  EXPECT_DOUBLE_EQ(a.fraction2, 0.2);
  const auto b = intersection_overlap(report({1}, 10), report({1}, 10));
  EXPECT_DOUBLE_EQ(b.overlap, 0.1);
  EXPECT_EQ(b.shared, 1u);
  EXPECT_THROW(intersection_overlap(report({1}, 10), report({1}, 11)), ValidationError);
}

TEST(Decomposition, CoversEveryIndexOnce) {
  const std::vector<std::pair<double, double>> preds(10, {0.0, 1.0});
  const auto none = exhibit1_decomposition(report({}, 10), report({2, 5}, 10), preds);
  EXPECT_TRUE(none.S1.empty());
  EXPECT_TRUE(none.S2.empty());
  EXPECT_EQ(none.S3, (std::vector<std::size_t>{2, 5}));
  EXPECT_EQ(none.S3.size() + none.S4.size(), 10u);

  const auto clean = exhibit1_decomposition(report({}, 10), report({}, 10), preds);
  EXPECT_EQ(clean.S4.size(), 10u);

  const auto mixed = exhibit1_decomposition(report({1, 2, 3}, 10), report({3, 4}, 10), preds);
  EXPECT_EQ(mixed.S1, (std::vector<std::size_t>{3}));
  EXPECT_EQ(mixed.S2, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(mixed.S3, (std::vector<std::size_t>{4}));
  EXPECT_EQ(mixed.size(), 10u);
  EXPECT_EQ(mixed.paired_predictions.size(), 10u);

  EXPECT_THROW(exhibit1_decomposition(report({}, 10), report({}, 10), {}), ValidationError);
}

}  // namespace
}  // namespace chaospred
