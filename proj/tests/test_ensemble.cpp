#include <gtest/gtest.h>

#include <cmath>

#include "chaospred.hpp"
#include "oracles.hpp"

namespace chaospred {
namespace {

PredictiveDensity random_density(Rng& rng, std::size_t components, std::size_t atoms) {
  PredictiveDensity d;
  std::vector<double> w(components);
  double total = 0;
  for (auto& v : w) total += (v = 0.1 + rng.uniform());
  for (std::size_t c = 0; c < components; ++c) {
    DensityComponent comp{10 * rng.uniform() - 5, {}, w[c] / total};
    for (std::size_t i = 0; i < atoms; ++i) comp.residuals.push_back(std::round(8 * (rng.uniform() - 0.5)) / 4);
    d.components.push_back(comp);
  }
  // renormalise so the weights pass the 1e-12 check exactly
  double s = 0;
  for (std::size_t c = 0; c + 1 < components; ++c) s += d.components[c].weight;
  d.components.back().weight = 1.0 - s;
  return d;
}

TEST(Density, PointMass) {
  const PredictiveDensity d{{{3.0, {0.0, 0.0, 0.0}, 1.0}}};
  for (double q : {0.01, 0.25, 0.5, 0.99}) EXPECT_EQ(density_quantile(d, q), 3.0);
  const PredictiveDensity five{{{5.0, {0.0}, 1.0}}};
  EXPECT_EQ(tail_probability(five, 4.0), 1.0);
  EXPECT_EQ(tail_probability(five, 6.0), 0.0);
}

TEST(Density, TwoAtomMixture) {
  const PredictiveDensity d{{{0.0, {0.0}, 0.5}, {10.0, {0.0}, 0.5}}};
  EXPECT_EQ(tail_probability(d, 5.0), 0.5);
}

TEST(Density, LowerQuantileConvention) {
  const PredictiveDensity d{{{0.0, {1, 2, 3, 4}, 1.0}}};
  EXPECT_EQ(density_quantile(d, 0.5), 2.0);
  EXPECT_EQ(density_quantile(d, 0.51), 3.0);
  EXPECT_EQ(density_quantile(d, 0.25), 1.0);
  EXPECT_THROW(density_quantile(d, 0.0), ValidationError);
  EXPECT_THROW(density_quantile(d, 1.0), ValidationError);
}

TEST(Density, MatchesEnumerationOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_density(rng, 1 + rng.below(6), 1 + rng.below(300));
    for (int i = 0; i < 50; ++i) {
      const double q = 0.001 + 0.998 * rng.uniform();
      EXPECT_EQ(density_quantile(d, q), oracle::quantile(d, q));
      const double t = 12 * rng.uniform() - 6;
      EXPECT_EQ(tail_probability(d, t), oracle::tail(d, t));
    }
  }
}

TEST(Density, MonotoneAndConsistent) {
  Rng rng(22);
  const auto d = random_density(rng, 4, 250);
  double prev_tail = 1.0;
  for (double t = -10; t <= 10; t += 0.05) {
    const double p = tail_probability(d, t);
    EXPECT_LE(p, prev_tail + 1e-15);
    prev_tail = p;
  }
  double prev_q = -INFINITY;
  const double slack = 1.0 / static_cast<double>(d.support_size());
  for (double q = 0.005; q < 1.0; q += 0.005) {
    const double v = density_quantile(d, q);
    EXPECT_GE(v, prev_q);
    prev_q = v;
    EXPECT_LE(tail_probability(d, v), 1.0 - q + slack);
  }
}

TEST(Density, Validation) {
  EXPECT_THROW(density_quantile(PredictiveDensity{{{0.0, {0.0}, 0.6}}}, 0.5), ValidationError);
  EXPECT_THROW(density_quantile(PredictiveDensity{{{0.0, {}, 1.0}}}, 0.5), ValidationError);
  EXPECT_THROW(density_quantile(PredictiveDensity{{{0.0, {0.0}, 1.5}, {0.0, {0.0}, -0.5}}}, 0.5), ValidationError);
}

TEST(Calibration, SelfDrawnTruthIsCalibrated) {
  Rng rng(31);
  PredictiveDensity d;
  for (int c = 0; c < 2; ++c) {
    DensityComponent comp{c * 3.0, {}, 0.5};
    for (int i = 0; i < 500; ++i) {
      // Box-Muller
      const double u = 1.0 - rng.uniform(), v = rng.uniform();
      comp.residuals.push_back(std::sqrt(-2 * std::log(u)) * std::cos(2 * M_PI * v));
    }
    d.components.push_back(comp);
  }
  std::vector<PredictiveDensity> ds(1000, d);
  std::vector<double> truths;
  for (int i = 0; i < 1000; ++i) {
    const auto& comp = d.components[rng.below(2)];
    truths.push_back(comp.mu + comp.residuals[rng.below(comp.residuals.size())]);
  }
  const auto r = score_calibration(ds, truths);
  EXPECT_GE(r.coverage.at(0.9), 0.87);
  EXPECT_LE(r.coverage.at(0.9), 0.93);
  for (double p : r.pit_values) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(Calibration, ExactAndMissedTruths) {
  std::vector<PredictiveDensity> ds;
  std::vector<double> truths;
  for (int i = 0; i < 20; ++i) {
    ds.push_back({{{static_cast<double>(i), {0.0}, 1.0}}});
    truths.push_back(i);
  }
  const auto hit = score_calibration(ds, truths);
  for (const auto& [level, cov] : hit.coverage) EXPECT_EQ(cov, 1.0) << level;
  for (auto& t : truths) t += 100;
  const auto miss = score_calibration(ds, truths);
  for (const auto& [level, cov] : miss.coverage) EXPECT_EQ(cov, 0.0) << level;
}

class LorenzEnsemble : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto spec = default_system(SystemKind::lorenz);
    spec.dt = 0.05;
    series_ = new MultiSeries(integrate_flow(spec, 8000));
    PartitionOptions opts;
    opts.target = 0;
    opts.horizon = 5;
    ensemble_ = new PartitionEnsemble(
        make_partitions(3, 3, 4, 1, default_partition_mode(3, 3, 4), opts));
  }
  static void TearDownTestSuite() {
    delete series_;
    delete ensemble_;
  }
  static MultiSeries* series_;
  static PartitionEnsemble* ensemble_;
};
MultiSeries* LorenzEnsemble::series_ = nullptr;
PartitionEnsemble* LorenzEnsemble::ensemble_ = nullptr;

TEST_F(LorenzEnsemble, AssemblesEqualWeights) {
  const EnsembleConfig cfg;
  const auto d = ensemble_predict(*series_, *ensemble_, 6000, cfg);
  ASSERT_EQ(d.components.size(), 4u);
  double total = 0;
  for (const auto& c : d.components) {
    EXPECT_EQ(c.weight, 0.25);
    EXPECT_FALSE(c.residuals.empty());
    total += c.weight;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST_F(LorenzEnsemble, SupportBracketsTruth) {
  const EnsembleConfig cfg;
  std::size_t bracketed = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    const std::size_t t = 3900 + 20 * i;
    const auto d = ensemble_predict(*series_, *ensemble_, t, cfg);
    const double truth = series_->values(t + 5, 0);
    const auto atoms = support(d);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& a : atoms) {
      lo = std::min(lo, a.value);
      hi = std::max(hi, a.value);
    }
    bracketed += lo <= truth && truth <= hi;
  }
  EXPECT_GE(bracketed, 160u);
}

TEST_F(LorenzEnsemble, NoFutureLeakage) {
  const EnsembleConfig cfg;
  for (std::size_t t : {2500u, 4321u, 7000u}) {
    const auto full = ensemble_predict(*series_, *ensemble_, t, cfg);
    EXPECT_EQ(full, ensemble_predict(series_->head(t + 1), *ensemble_, t, cfg));
    MultiSeries tampered = *series_;
    for (std::size_t r = t + 1; r < tampered.length(); ++r) tampered.values(r, 0) = 1e3;
    EXPECT_EQ(full, ensemble_predict(tampered, *ensemble_, t, cfg));
  }
}

TEST_F(LorenzEnsemble, ConfiguredWeights) {
  EnsembleConfig cfg;
  cfg.weights = {0.1, 0.2, 0.3, 0.4};
  const auto d = ensemble_predict(*series_, *ensemble_, 5000, cfg);
  EXPECT_EQ(d.components[3].weight, 0.4);
  cfg.weights = {0.1, 0.2, 0.3, 0.3};
  EXPECT_THROW(ensemble_predict(*series_, *ensemble_, 5000, cfg), ValidationError);
  cfg.weights = {0.5, 0.5};
  EXPECT_THROW(ensemble_predict(*series_, *ensemble_, 5000, cfg), ValidationError);
}

TEST_F(LorenzEnsemble, CalibrationIsDeterministic) {
  std::vector<std::size_t> times;
  for (std::size_t i = 0; i < 30; ++i) times.push_back(6000 + 25 * i);
  const EnsembleConfig cfg;
  const auto a = evaluate_calibration(*series_, *ensemble_, times, cfg);
  const auto b = evaluate_calibration(*series_, *ensemble_, times, cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.min_spacing, 25u);
  EXPECT_EQ(a.pit_values.size(), 30u);
  for (const auto& [level, cov] : a.coverage) {
    EXPECT_GE(cov, 0.0);
    EXPECT_LE(cov, 1.0);
  }
}

TEST_F(LorenzEnsemble, Errors) {
  const EnsembleConfig cfg;
  EXPECT_THROW(ensemble_predict(*series_, *ensemble_, 5, cfg), ValidationError);
  PartitionEnsemble mixed = *ensemble_;
  mixed.specs[1].horizon = 2;
  EXPECT_THROW(ensemble_predict(*series_, mixed, 5000, cfg), ValidationError);
  const std::vector<std::size_t> unordered{5000, 4000};
  EXPECT_THROW(evaluate_calibration(*series_, *ensemble_, unordered, cfg), ValidationError);
  const std::vector<std::size_t> late{7999};
  EXPECT_THROW(evaluate_calibration(*series_, *ensemble_, late, cfg), ValidationError);
  EnsembleConfig bad;
  bad.gamma = 1.0;
  EXPECT_THROW(ensemble_predict(*series_, *ensemble_, 5000, bad), ValidationError);
}

}  // namespace
}  // namespace chaospred
