#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "spe/errors.hpp"
#include "spe/gaussian.hpp"
#include "spe/rng.hpp"

namespace spe {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

DiagonalGaussian random_gaussian(std::size_t d, Rng& rng) {
  std::uniform_real_distribution<double> mean(-3.0, 3.0);
  std::uniform_real_distribution<double> var(0.1, 4.0);
  std::vector<double> m(d), v(d);
  for (std::size_t i = 0; i < d; ++i) {
    m[i] = mean(rng);
    v[i] = var(rng);
  }
  return {m, v};
}

double density_1d(double mean, double var, double z) {
  return std::exp(-0.5 * (z - mean) * (z - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

TEST(GaussianLogDensity, ClosedForms) {
  const auto g = DiagonalGaussian::isotropic({0.0}, 1.0);
  const std::vector<double> zero{0.0}, one{1.0};
  EXPECT_NEAR(log_density(g, zero), -kHalfLog2Pi, 1e-15);
  EXPECT_NEAR(log_density(g, one), -kHalfLog2Pi - 0.5, 1e-15);
}

TEST(GaussianLogDensity, SumOfAxes) {
  Rng rng(1);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_gaussian(3, rng);
    const std::vector<double> z{normal(rng), normal(rng), normal(rng)};
    double expected = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      expected += std::log(density_1d(g.mean()[i], g.variance()[i], z[i]));
    }
    EXPECT_NEAR(log_density(g, z), expected, 1e-12);
  }
}

TEST(GaussianLogDensity, IntegratesToOne) {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = random_gaussian(1, rng);
    const double lo = -20.0, hi = 20.0;
    const std::size_t n = 100001;
    const double h = (hi - lo) / static_cast<double>(n - 1);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> z{lo + h * static_cast<double>(i)};
      const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      total += w * std::exp(log_density(g, z));
    }
    EXPECT_NEAR(total * h, 1.0, 1e-6);
  }
}

TEST(GaussianLogDensity, DimensionMismatch) {
  const auto g = DiagonalGaussian::isotropic({0.0, 0.0}, 1.0);
  const std::vector<double> z{0.0};
  EXPECT_THROW(log_density(g, z), DimensionError);
  EXPECT_THROW(sample(g, z), DimensionError);
  EXPECT_THROW(DiagonalGaussian({0.0}, {1.0, 1.0}), DimensionError);
}

TEST(GaussianConstruction, FloorAndRejection) {
  const DiagonalGaussian g({0.0, 1.0}, {0.0, 1e-30});
  EXPECT_EQ(g.variance()[0], kVarianceFloor);
  EXPECT_EQ(g.variance()[1], kVarianceFloor);
  EXPECT_THROW(DiagonalGaussian({0.0}, {-1.0}), NumericalError);
  EXPECT_THROW(DiagonalGaussian({0.0}, {std::nan("")}), NumericalError);
}

TEST(GaussianSample, ZeroNoiseReturnsMean) {
  const DiagonalGaussian g({1.5, -2.0}, {3.0, 0.5});
  const std::vector<double> u{0.0, 0.0};
  EXPECT_EQ(sample(g, u), g.mean());
}

TEST(GaussianSample, FloorVarianceCollapsesToMean) {
  const DiagonalGaussian g({1.5, -2.0}, {0.0, 0.0});
  const std::vector<double> u{5.0, -5.0};
  const auto z = sample(g, u);
  EXPECT_NEAR(z[0], 1.5, 1e-7);
  EXPECT_NEAR(z[1], -2.0, 1e-7);
}

TEST(GaussianSample, MomentsWithinThreeStandardErrors) {
  const DiagonalGaussian g({1.5, -2.0}, {3.0, 0.5});
  Rng rng(3);
  std::normal_distribution<double> normal;
  const std::size_t n = 100000;
  std::vector<double> sum(2, 0.0), sum_sq(2, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::vector<double> u{normal(rng), normal(rng)};
    const auto z = sample(g, u);
    for (std::size_t i = 0; i < 2; ++i) {
      sum[i] += z[i];
      sum_sq[i] += z[i] * z[i];
    }
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const double var = g.variance()[i];
    const double m = sum[i] / n;
    const double v = sum_sq[i] / n - m * m;
    EXPECT_LT(std::fabs(m - g.mean()[i]), 3.0 * std::sqrt(var / n));
    EXPECT_LT(std::fabs(v - var), 3.0 * var * std::sqrt(2.0 / n));
  }
}

TEST(GaussianProduct, SingleIsIdentity) {
  const std::vector<DiagonalGaussian> one{DiagonalGaussian({0.3, -1.0}, {2.0, 0.7})};
  EXPECT_EQ(product(one), one[0]);
}

TEST(GaussianProduct, SymmetricEqualVariance) {
  const std::vector<DiagonalGaussian> gs{DiagonalGaussian::isotropic({0.0}, 1.0),
                                         DiagonalGaussian::isotropic({2.0}, 1.0)};
  const auto p = product(gs);
  EXPECT_DOUBLE_EQ(p.mean()[0], 1.0);
  EXPECT_DOUBLE_EQ(p.variance()[0], 0.5);
}

TEST(GaussianProduct, MatchesQuadratureNormalization) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<DiagonalGaussian> gs{random_gaussian(1, rng), random_gaussian(1, rng), random_gaussian(1, rng)};
    const auto p = product(gs);
    const double lo = -20.0, hi = 20.0;
    const std::size_t n = 100000;
    const double h = (hi - lo) / static_cast<double>(n - 1);
    std::vector<double> raw(n);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = lo + h * static_cast<double>(i);
      raw[i] = 1.0;
      for (const auto& g : gs) raw[i] *= density_1d(g.mean()[0], g.variance()[0], z);
      mass += ((i == 0 || i == n - 1) ? 0.5 : 1.0) * raw[i];
    }
    mass *= h;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> z{lo + h * static_cast<double>(i)};
      worst = std::max(worst, std::fabs(raw[i] / mass - std::exp(log_density(p, z))));
    }
    EXPECT_LT(worst, 1e-8);
  }
}

TEST(GaussianProduct, PrecisionsAddAndAssociative) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_gaussian(3, rng), b = random_gaussian(3, rng), c = random_gaussian(3, rng);
    const std::vector<DiagonalGaussian> abc{a, b, c};
    const std::vector<DiagonalGaussian> ab{a, b};
    const std::vector<DiagonalGaussian> ab_c{product(ab), c};
    const std::vector<DiagonalGaussian> cba{c, b, a};
    const auto direct = product(abc);
    const auto nested = product(ab_c);
    const auto reversed = product(cba);
    for (std::size_t i = 0; i < 3; ++i) {
      const double precision = 1.0 / a.variance()[i] + 1.0 / b.variance()[i] + 1.0 / c.variance()[i];
      EXPECT_NEAR(1.0 / direct.variance()[i], precision, 1e-12 * precision);
      EXPECT_NEAR(direct.mean()[i], nested.mean()[i], 1e-12);
      EXPECT_NEAR(direct.variance()[i], nested.variance()[i], 1e-12);
      EXPECT_NEAR(direct.mean()[i], reversed.mean()[i], 1e-12);
    }
  }
}

TEST(GaussianProduct, Errors) {
  EXPECT_THROW(product({}), DimensionError);
  const std::vector<DiagonalGaussian> mixed{DiagonalGaussian::isotropic({0.0}, 1.0),
                                            DiagonalGaussian::isotropic({0.0, 0.0}, 1.0)};
  EXPECT_THROW(product(mixed), DimensionError);
}

TEST(GaussianIdentityFactor, IdenticalStandardInputs) {
  const auto x = DiagonalGaussian::isotropic({0.0}, 1.0);
  const auto f = product_identity_factor(x, x);
  EXPECT_DOUBLE_EQ(f.intersection.mean()[0], 0.0);
  EXPECT_DOUBLE_EQ(f.intersection.variance()[0], 0.5);
  EXPECT_NEAR(f.log_prefactor, -0.5 * std::log(4.0 * std::numbers::pi), 1e-15);
}

TEST(GaussianIdentityFactor, HoldsPointwise) {
  Rng rng(6);
  std::normal_distribution<double> normal(0.0, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_gaussian(2, rng), y = random_gaussian(2, rng);
    const auto f = product_identity_factor(x, y);
    for (int k = 0; k < 100; ++k) {
      const std::vector<double> z{normal(rng), normal(rng)};
      const double lhs = log_density(x, z) + log_density(y, z);
      const double rhs = log_density(f.intersection, z) + f.log_prefactor;
      worst = std::max(worst, std::fabs(lhs - rhs));
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(GaussianIdentityFactor, Symmetric) {
  Rng rng(7);
  const auto x = random_gaussian(2, rng), y = random_gaussian(2, rng);
  const auto xy = product_identity_factor(x, y);
  const auto yx = product_identity_factor(y, x);
  EXPECT_NEAR(xy.log_prefactor, yx.log_prefactor, 1e-14);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(xy.intersection.mean()[i], yx.intersection.mean()[i], 1e-14);
    EXPECT_NEAR(xy.intersection.variance()[i], yx.intersection.variance()[i], 1e-14);
  }
  EXPECT_THROW(product_identity_factor(x, DiagonalGaussian::isotropic({0.0}, 1.0)), DimensionError);
}

TEST(GaussianLogSumExp, StableAndEmpty) {
  const std::vector<double> big{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::numbers::ln2, 1e-12);
  EXPECT_EQ(log_sum_exp(std::span<const double>{}), -std::numeric_limits<double>::infinity());
}

}  // namespace
}  // namespace spe
