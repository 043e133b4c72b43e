#include <cmath>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "curveflow/error.hpp"
#include "curveflow/noise.hpp"

using namespace curveflow;
using std::numbers::pi;

TEST(Noise, BasisDerivativesAreExact) {
  Grid g(Topology::Closed, 32);
  const Field r = g.nodes();
  const double k = 2 * pi * 3;
  BasisFunction c{BasisFunction::Shape::Cosine, 3, 0.5};
  BasisFunction s{BasisFunction::Shape::Sine, 3, 0.5};
  EXPECT_LT((c.eval(r, 1) + 0.5 * k * (k * r).sin()).abs().maxCoeff(), 1e-12);
  EXPECT_LT((c.eval(r, 3) - 0.5 * k * k * k * (k * r).sin()).abs().maxCoeff(), 1e-9);
  EXPECT_LT((s.eval(r, 1) - 0.5 * k * (k * r).cos()).abs().maxCoeff(), 1e-12);
  EXPECT_LT((s.eval(r, 2) + 0.5 * k * k * (k * r).sin()).abs().maxCoeff(), 1e-10);
  BasisFunction one{};
  EXPECT_EQ(one.eval(r, 0)[5], 1.0);
  EXPECT_EQ(one.eval(r, 2).abs().maxCoeff(), 0.0);
}

TEST(Noise, ScalarAndSpectralModels) {
  const NoiseModel s = NoiseModel::scalar(0.3);
  EXPECT_EQ(s.mode(), NoiseMode::Scalar);
  EXPECT_EQ(s.n_modes(), 1);
  EXPECT_TRUE(s.active());
  EXPECT_FALSE(NoiseModel::scalar(0.0).active());

  const NoiseModel sp = NoiseModel::spectral(4, 1.0, 2.0);
  ASSERT_EQ(sp.n_modes(), 4);
  EXPECT_EQ(sp.basis()[0].shape, BasisFunction::Shape::Cosine);
  EXPECT_EQ(sp.basis()[1].shape, BasisFunction::Shape::Sine);
  EXPECT_EQ(sp.basis()[2].wavenumber, 2);
  EXPECT_DOUBLE_EQ(sp.basis()[3].coefficient, 0.25);
  Grid g(Topology::Closed, 16);
  EXPECT_THROW(sp.basis_eval(5, 0, g), DomainError);
  EXPECT_THROW(sp.basis_eval(0, 0, g), DomainError);
}

TEST(Noise, AmplitudeValidation) {
  try {
    NoiseModel::scalar(-1.0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "noise.amplitude");
  }
}

TEST(Noise, SummabilityBound) {
  const NoiseModel slow = NoiseModel::spectral(40, 1.0, 1.0);
  try {
    slow.check_summability(1e6);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "noise.c4_bound");
  }
  EXPECT_NO_THROW(NoiseModel::spectral(40, 1.0, 6.0).check_summability(1e6));
}

TEST(Noise, IncrementsAreReproducibleAndIndexed) {
  BrownianDriver a(42, 7), b(42, 7), c(42, 8), d(42, 7, 1);
  const auto x = a.increments(5, 0.01);
  EXPECT_EQ(x, b.increments(5, 0.01));
  EXPECT_NE(x, c.increments(5, 0.01));
  EXPECT_NE(x, d.increments(5, 0.01));
  EXPECT_THROW(a.increments(5, 0.0), DomainError);
  EXPECT_THROW(a.increments(5, -1.0), DomainError);
}

TEST(Noise, DerivedSeedsDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    seen.insert(derive_seed(1, i, 0));
    seen.insert(derive_seed(1, i, 1));
  }
  EXPECT_EQ(seen.size(), 2000u);
}

TEST(Noise, IncrementVarianceChiSquare) {
  // (N-1) s^2 / dt ~ chi^2(N-1); for N = 20000 the 99.99% band is about +-4.5%.
  const int N = 20000;
  const double dt = 0.01;
  BrownianDriver drv(11, 0);
  double sum = 0, sumsq = 0;
  for (int i = 0; i < N; ++i) {
    const double x = drv.increments(1, dt)[0];
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / N;
  const double var = (sumsq - N * mean * mean) / (N - 1);
  const double chi = (N - 1) * var / dt;
  const double sd = std::sqrt(2.0 * (N - 1));
  EXPECT_LT(std::abs(chi - (N - 1)), 4.0 * sd);
  EXPECT_LT(std::abs(mean), 4.0 * std::sqrt(dt / N));
}

TEST(Noise, BridgeSplitPreservesTotalAndVariance) {
  BrownianDriver bridge(3, 0, 1);
  const std::vector<double> total = {0.3, -0.1};
  const auto parts = bridge_split(total, 0.04, 4, bridge);
  ASSERT_EQ(parts.size(), 4u);
  for (int m = 0; m < 2; ++m) {
    double s = 0;
    for (const auto& p : parts) s += p[m];
    EXPECT_NEAR(s, total[m], 1e-15);
  }
  // Unconditional law of a piece: a N(0, dt) total split into k pieces gives N(0, dt/k) pieces.
  BrownianDriver drv(4, 0);
  const int N = 20000;
  double sumsq = 0;
  for (int i = 0; i < N; ++i) {
    const auto w = drv.increments(1, 0.04);
    sumsq += std::pow(bridge_split(w, 0.04, 4, bridge)[1][0], 2);
  }
  const double var = sumsq / N;
  EXPECT_NEAR(var / 0.01, 1.0, 4.0 * std::sqrt(2.0 / N));
}
