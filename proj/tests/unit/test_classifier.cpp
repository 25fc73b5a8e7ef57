#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "grad_check.hpp"
#include "spe/classifier.hpp"
#include "spe/errors.hpp"

namespace spe {
namespace {

Prototype make_prototype(std::vector<double> mean, std::vector<double> inflated, std::size_t id) {
  auto posterior = DiagonalGaussian(mean, inflated);
  return {id, posterior, inflated};
}

struct Setup {
  DiagonalGaussian query;
  std::vector<Prototype> prototypes;
};

// Random 2-D, 4-class problem with moderate query and class variances.
Setup random_setup(Rng& rng) {
  std::uniform_real_distribution<double> mean(-1.5, 1.5), qvar(0.05, 0.5), cvar(0.5, 2.0);
  Setup s{DiagonalGaussian({mean(rng), mean(rng)}, {qvar(rng), qvar(rng)}), {}};
  for (std::size_t c = 0; c < 4; ++c) s.prototypes.push_back(make_prototype({mean(rng), mean(rng)}, {cvar(rng), cvar(rng)}, c));
  return s;
}

double total_variation(const std::vector<double>& log_p, const std::vector<double>& log_q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) tv += std::fabs(std::exp(log_p[i]) - std::exp(log_q[i]));
  return 0.5 * tv;
}

TEST(ConditionalSoftmax, TwoClassClosedForm) {
  const std::vector<Prototype> p{make_prototype({0.0}, {1.0}, 0), make_prototype({2.0}, {1.0}, 1)};
  const std::vector<double> z{0.0};
  const auto lp = conditional_log_softmax(z, p);
  EXPECT_NEAR(std::exp(lp[0]), 1.0 / (1.0 + std::exp(-2.0)), 1e-14);
  EXPECT_NEAR(std::exp(lp[0]), 0.8808, 1e-4);
}

TEST(ConditionalSoftmax, EquidistantIsUniform) {
  const std::vector<Prototype> p{make_prototype({-1.0, 0.0}, {0.7, 0.7}, 0), make_prototype({1.0, 0.0}, {0.7, 0.7}, 1)};
  const std::vector<double> z{0.0, 3.0};
  const auto lp = conditional_log_softmax(z, p);
  EXPECT_NEAR(std::exp(lp[0]), 0.5, 1e-15);
  EXPECT_NEAR(std::exp(lp[1]), 0.5, 1e-15);
}

TEST(ConditionalSoftmax, EqualVariancesGiveSquaredDistanceSoftmax) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double var = 0.6;
  std::vector<Prototype> p;
  for (std::size_t c = 0; c < 5; ++c) p.push_back(make_prototype({u(rng), u(rng)}, {var, var}, c));
  const std::vector<double> z{u(rng), u(rng)};
  std::vector<double> logits;
  for (const auto& proto : p) {
    const double dx = z[0] - proto.posterior.mean()[0], dy = z[1] - proto.posterior.mean()[1];
    logits.push_back(-(dx * dx + dy * dy) / (2.0 * var));
  }
  const double norm = log_sum_exp(logits);
  const auto lp = conditional_log_softmax(z, p);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(lp[c], logits[c] - norm, 1e-12);
}

TEST(ConditionalSoftmax, Errors) {
  const std::vector<Prototype> p{make_prototype({0.0}, {1.0}, 0), make_prototype({2.0}, {1.0}, 1)};
  const std::vector<double> z{0.0, 0.0};
  EXPECT_THROW(conditional_log_softmax(z, p), DimensionError);
  EXPECT_THROW(conditional_log_softmax(z, {}), DimensionError);
}

TEST(NaivePosterior, FloorVarianceEqualsSoftmaxAtMean) {
  Rng rng(2);
  auto s = random_setup(rng);
  const DiagonalGaussian point(s.query.mean(), {0.0, 0.0});
  const auto exact = conditional_log_softmax(point.mean(), s.prototypes);
  for (std::size_t n : {1u, 7u, 200u}) {
    const auto post = naive_posterior(point, s.prototypes, standard_normal(n, 2, rng));
    EXPECT_EQ(post.sample_count, n);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(post.log_probs[c], exact[c], 1e-6);
  }
}

TEST(NaivePosterior, NormalizedAndEquivariant) {
  Rng rng(3);
  const auto s = random_setup(rng);
  const auto noise = standard_normal(50, 2, rng);
  const auto post = naive_posterior(s.query, s.prototypes, noise);
  double total = 0.0;
  for (double p : post.probabilities()) total += p;
  EXPECT_NEAR(total, 1.0, 1e-9);
  std::vector<Prototype> rotated{s.prototypes[2], s.prototypes[3], s.prototypes[0], s.prototypes[1]};
  const auto again = naive_posterior(s.query, rotated, noise);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(again.log_probs[c], post.log_probs[(c + 2) % 4], 1e-12);
}

TEST(NaivePosterior, MatchesQuadratureWithManySamples) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = random_setup(rng);
    const auto naive = naive_posterior(s.query, s.prototypes, standard_normal(100000, 2, rng));
    const auto quad = quadrature_posterior(s.query, s.prototypes);
    EXPECT_LT(total_variation(naive.log_probs, quad.log_probs), 1e-2);
  }
}

TEST(NaivePosterior, ErrorShrinksWithSampleCount) {
  Rng rng(5);
  const std::vector<std::size_t> counts{1, 10, 100, 10000};
  std::vector<double> mean_tv(counts.size(), 0.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_setup(rng);
    const auto quad = quadrature_posterior(s.query, s.prototypes, {201, 8.0});
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const auto naive = naive_posterior(s.query, s.prototypes, standard_normal(counts[k], 2, rng));
      mean_tv[k] += total_variation(naive.log_probs, quad.log_probs) / 50.0;
    }
  }
  for (std::size_t k = 1; k < counts.size(); ++k) EXPECT_LT(mean_tv[k], mean_tv[k - 1]);
}

TEST(NaivePosterior, PnReduction) {
  Rng rng(6);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Prototype> p;
    for (std::size_t c = 0; c < 4; ++c) p.push_back(make_prototype({u(rng), u(rng)}, {1.0, 1.0}, c));
    const DiagonalGaussian point({u(rng), u(rng)}, {0.0, 0.0});
    const auto pn = deterministic_posterior(point.mean(), p);
    const auto naive = naive_posterior(point, p, standard_normal(1 + trial * 10, 2, rng));
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(std::exp(naive.log_probs[c]), std::exp(pn.log_probs[c]), 1e-6);
  }
}

TEST(IntersectionPosterior, SingleClassIsZero) {
  // With one class the estimate is zero only in expectation; a query that is
  // tighter than the class keeps the s=64 spread small.
  Rng rng(7);
  const DiagonalGaussian x({0.3, -0.2}, {0.1, 0.1});
  const std::vector<Prototype> one{make_prototype({0.0, 0.0}, {1.0, 1.0}, 0)};
  for (int rep = 0; rep < 10; ++rep) {
    EXPECT_LT(std::fabs(intersection_posterior(x, one, 0, standard_normal(64, 2, rng))), 0.2);
  }
  EXPECT_NEAR(quadrature_posterior(x, one).log_probs[0], 0.0, 1e-12);
}

TEST(IntersectionPosterior, MatchesQuadratureOnTarget) {
  Rng rng(8);
  for (int trial = 0; trial < 3; ++trial) {
    const auto s = random_setup(rng);
    const auto quad = quadrature_posterior(s.query, s.prototypes);
    for (std::size_t target = 0; target < 4; ++target) {
      double avg = 0.0;
      for (int rep = 0; rep < 100; ++rep) {
        avg += intersection_posterior(s.query, s.prototypes, target, standard_normal(10000, 2, rng)) / 100.0;
      }
      EXPECT_NEAR(avg, quad.log_probs[target], 1e-2);
    }
  }
}

TEST(IntersectionPosterior, SeparatedLimitIsCertain) {
  Rng rng(9);
  std::vector<Prototype> p;
  for (std::size_t c = 0; c < 4; ++c) p.push_back(make_prototype({10.0 * c, 0.0}, {0.01, 0.01}, c));
  const DiagonalGaussian x({20.0, 0.0}, {1e-8, 1e-8});
  EXPECT_NEAR(intersection_posterior(x, p, 2, standard_normal(16, 2, rng)), 0.0, 1e-6);
  EXPECT_THROW(intersection_posterior(x, p, 4, standard_normal(1, 2, rng)), DimensionError);
}

TEST(IntersectionPosterior, LowerVarianceThanNaiveAtOneSample) {
  // Averaged over setups. Individual setups can go either way: the
  // intersection estimate has heavy tails when the query is wide relative to
  // the target class.
  Rng rng(10);
  const int setups = 50, draws = 1000;
  double mean_vi = 0.0, mean_vn = 0.0;
  for (int trial = 0; trial < setups; ++trial) {
    const auto s = random_setup(rng);
    double si = 0.0, si2 = 0.0, sn = 0.0, sn2 = 0.0;
    for (int k = 0; k < draws; ++k) {
      const double a = intersection_posterior(s.query, s.prototypes, 0, standard_normal(1, 2, rng));
      const double b = naive_posterior(s.query, s.prototypes, standard_normal(1, 2, rng)).log_probs[0];
      si += a;
      si2 += a * a;
      sn += b;
      sn2 += b * b;
    }
    mean_vi += (si2 / draws - (si / draws) * (si / draws)) / setups;
    mean_vn += (sn2 / draws - (sn / draws) * (sn / draws)) / setups;
  }
  EXPECT_LT(mean_vi, mean_vn);
}

TEST(QuadraturePosterior, FloorMatchesSoftmax) {
  Rng rng(11);
  const auto s = random_setup(rng);
  const DiagonalGaussian point(s.query.mean(), {1e-14, 1e-14});
  const auto quad = quadrature_posterior(point, s.prototypes);
  const auto exact = conditional_log_softmax(point.mean(), s.prototypes);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(quad.log_probs[c], exact[c], 1e-6);
}

TEST(QuadraturePosterior, ConvergesUnderRefinement) {
  Rng rng(12);
  const auto s = random_setup(rng);
  const auto coarse = quadrature_posterior(s.query, s.prototypes, {401, 8.0});
  const auto fine = quadrature_posterior(s.query, s.prototypes, {801, 8.0});
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(coarse.log_probs[c], fine.log_probs[c], 1e-6);
}

TEST(QuadraturePosterior, SymmetricMidpoint) {
  const std::vector<Prototype> p{make_prototype({-1.0, 0.0}, {0.8, 0.8}, 0), make_prototype({1.0, 0.0}, {0.8, 0.8}, 1)};
  const DiagonalGaussian x({0.0, 0.5}, {0.3, 0.2});
  const auto post = quadrature_posterior(x, p);
  EXPECT_NEAR(std::exp(post.log_probs[0]), 0.5, 1e-8);
  EXPECT_NEAR(std::exp(post.log_probs[1]), 0.5, 1e-8);
}

TEST(QuadraturePosterior, RejectsHighDimensions) {
  const std::vector<Prototype> p{make_prototype({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, 0),
                                 make_prototype({1.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, 1)};
  EXPECT_THROW(quadrature_posterior(DiagonalGaussian::isotropic({0.0, 0.0, 0.0}, 1.0), p), DimensionError);
}

TEST(ClassPosteriorTest, TiesPickLowestIndex) {
  ClassPosterior p{{std::log(0.4), std::log(0.4), std::log(0.2)}, 0, PosteriorMethod::kDeterministic};
  EXPECT_EQ(p.predicted(), 0u);
}

// Batch losses -------------------------------------------------------------

struct Batch {
  Tensor query_mean, query_var, proto_mean, proto_var;
  std::vector<std::size_t> targets;
};

Batch random_batch(Rng& rng, std::size_t q) {
  std::uniform_real_distribution<double> u(-1.5, 1.5), qv(0.05, 0.5), pv(0.5, 2.0);
  Batch b{Tensor::zeros(q, 2), Tensor::zeros(q, 2), Tensor::zeros(4, 2), Tensor::zeros(4, 2), {}};
  for (double& v : b.query_mean.data()) v = u(rng);
  for (double& v : b.query_var.data()) v = qv(rng);
  for (double& v : b.proto_mean.data()) v = u(rng);
  for (double& v : b.proto_var.data()) v = pv(rng);
  for (std::size_t i = 0; i < q; ++i) b.targets.push_back(i % 4);
  return b;
}

std::vector<Prototype> prototypes_of(const Batch& b) {
  std::vector<Prototype> out;
  for (std::size_t c = 0; c < 4; ++c) {
    out.push_back(make_prototype({b.proto_mean(c, 0), b.proto_mean(c, 1)}, {b.proto_var(c, 0), b.proto_var(c, 1)}, c));
  }
  return out;
}

TEST(BatchLosses, MatchScalarEstimators) {
  Rng rng(13);
  const auto b = random_batch(rng, 3);
  const std::size_t s = 5;
  const auto noise = standard_normal(3 * s, 2, rng);
  Tape tape;
  const EmbeddingVars q{tape.constant(b.query_mean), tape.constant(b.query_var)};
  const PrototypeVars p{tape.constant(b.proto_mean), tape.constant(b.proto_var)};
  const auto inter = intersection_log_posterior(q, p, b.targets, s, noise).value();
  const auto naive = naive_log_posterior(q, p, b.targets, s, noise).value();
  const auto det = deterministic_log_posterior(q.mean, p, b.targets).value();
  const auto protos = prototypes_of(b);
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor rows = Tensor::zeros(s, 2);
    for (std::size_t j = 0; j < s; ++j) {
      rows(j, 0) = noise(i * s + j, 0);
      rows(j, 1) = noise(i * s + j, 1);
    }
    const DiagonalGaussian x({b.query_mean(i, 0), b.query_mean(i, 1)}, {b.query_var(i, 0), b.query_var(i, 1)});
    EXPECT_NEAR(inter(i, 0), intersection_posterior(x, protos, b.targets[i], rows), 1e-12);
    EXPECT_NEAR(naive(i, 0), naive_posterior(x, protos, rows).log_probs[b.targets[i]], 1e-12);
    EXPECT_NEAR(det(i, 0), deterministic_posterior(x.mean(), protos).log_probs[b.targets[i]], 1e-12);
  }
}

TEST(BatchLosses, UniformCentroidGivesLn4) {
  Tape tape;
  const EmbeddingVars q{tape.constant(Tensor::matrix(1, 2, {0.0, 0.0})), tape.constant(Tensor::matrix(1, 2, {1e-16, 1e-16}))};
  const PrototypeVars p{tape.constant(Tensor::matrix(4, 2, {1, 0, -1, 0, 0, 1, 0, -1})), tape.constant(Tensor({4, 2}, 0.5))};
  Rng rng(14);
  for (auto method : {SamplerMethod::kIntersection, SamplerMethod::kNaive}) {
    const auto loss = training_loss(q, p, {2}, {method, 1}, standard_normal(1, 2, rng));
    EXPECT_NEAR(loss.value().item(), std::log(4.0), 1e-6);
  }
}

TEST(BatchLosses, SeparatedCaseHasNearZeroLoss) {
  Tape tape;
  const EmbeddingVars q{tape.constant(Tensor::matrix(1, 2, {10.0, 0.0})), tape.constant(Tensor({1, 2}, 1e-8))};
  const PrototypeVars p{tape.constant(Tensor::matrix(2, 2, {0.0, 0.0, 10.0, 0.0})), tape.constant(Tensor({2, 2}, 0.1))};
  Rng rng(15);
  EXPECT_NEAR(training_loss(q, p, {1}, {}, standard_normal(1, 2, rng)).value().item(), 0.0, 1e-6);
}

TEST(BatchLosses, GradientsMatchFiniteDifferences) {
  Rng rng(16);
  const auto b = random_batch(rng, 4);
  const std::size_t s = 3;
  const auto noise = standard_normal(4 * s, 2, rng);
  for (auto method : {SamplerMethod::kIntersection, SamplerMethod::kNaive}) {
    const auto err = testing::gradient_error(
        [&](Tape&, const std::vector<Var>& v) {
          return training_loss({v[0], v[1]}, {v[2], v[3]}, b.targets, {method, s}, noise);
        },
        {b.query_mean, b.query_var, b.proto_mean, b.proto_var}, 1e-6);
    EXPECT_LT(err, 1e-4) << to_string(method);
  }
  const auto err = testing::gradient_error(
      [&](Tape&, const std::vector<Var>& v) {
        return -mean(deterministic_log_posterior(v[0], {v[1], v[2]}, b.targets));
      },
      {b.query_mean, b.proto_mean, b.proto_var});
  EXPECT_LT(err, 1e-4);
}

TEST(BatchLosses, Errors) {
  Rng rng(17);
  const auto b = random_batch(rng, 2);
  Tape tape;
  const EmbeddingVars q{tape.constant(b.query_mean), tape.constant(b.query_var)};
  const PrototypeVars p{tape.constant(b.proto_mean), tape.constant(b.proto_var)};
  EXPECT_THROW(training_loss(q, p, {0}, {}, standard_normal(2, 2, rng)), DimensionError);
  EXPECT_THROW(training_loss(q, p, {0, 4}, {}, standard_normal(2, 2, rng)), DimensionError);
  EXPECT_THROW(training_loss(q, p, {0, 1}, {SamplerMethod::kNaive, 2}, standard_normal(2, 2, rng)), DimensionError);
  EXPECT_THROW(training_loss(q, p, {0, 1}, {SamplerMethod::kNaive, 0}, standard_normal(2, 2, rng)), ConfigError);
  EXPECT_THROW(parse_sampler_method("gibbs"), ConfigError);
}

}  // namespace
}  // namespace spe
