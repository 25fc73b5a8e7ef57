#pragma once

// Class posteriors p(y | x, S) for a Gaussian query embedding against a set
// of prototypes.
//
// The exact posterior integrates the class softmax over the query density,
// which has no closed form. Two Monte-Carlo estimators are provided:
//   naive         average the softmax over draws z ~ N(mu_x, sigma_x^2)
//   intersection  factor N(z; x) N(z; target) into a prefactor times the
//                 intersection density, then average the reciprocal of the
//                 class-density sum over draws from the intersection.
// A tensor-product trapezoidal quadrature serves as a reference for d <= 2.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spe/autodiff.hpp"
#include "spe/encoder.hpp"
#include "spe/gaussian.hpp"
#include "spe/prototype.hpp"
#include "spe/rng.hpp"

namespace spe {

enum class PosteriorMethod { kNaive, kIntersection, kQuadrature, kDeterministic };
enum class SamplerMethod { kNaive, kIntersection };

std::string to_string(SamplerMethod method);
SamplerMethod parse_sampler_method(const std::string& text);

struct ClassPosterior {
  std::vector<double> log_probs;
  std::size_t sample_count = 0;
  PosteriorMethod method = PosteriorMethod::kDeterministic;

  /// argmax with ties broken by the lowest class index.
  std::size_t predicted() const;
  std::vector<double> probabilities() const;
};

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::kIntersection;
  std::size_t samples_per_query = 1;

  void validate() const;
};

/// Standard-normal noise block, one row per draw.
Tensor standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

/// log p(y | z, S) for every class: log N(z; mu_y, sigma_hat_y^2) normalized
/// over classes.
std::vector<double> conditional_log_softmax(std::span<const double> z, std::span<const Prototype> prototypes);

/// Averages the softmax over draws mu_x + sigma_x * u, one per row of noise.
ClassPosterior naive_posterior(const DiagonalGaussian& query, std::span<const Prototype> prototypes,
                               const Tensor& noise);

/// Estimate of log p(target | x, S) from draws of the intersection of the
/// query density and the target class density (one draw per noise row).
double intersection_posterior(const DiagonalGaussian& query, std::span<const Prototype> prototypes,
                              std::size_t target, const Tensor& noise);

/// Softmax at the query mean; the PN decision rule when prototypes come
/// from form_pn_prototype.
ClassPosterior deterministic_posterior(std::span<const double> z, std::span<const Prototype> prototypes);

struct QuadratureGrid {
  std::size_t points_per_axis = 401;
  /// Integration box half-width in query standard deviations.
  double half_width_sd = 8.0;
};

/// Reference evaluation of the exact posterior for 1-D and 2-D embeddings.
ClassPosterior quadrature_posterior(const DiagonalGaussian& query, std::span<const Prototype> prototypes,
                                    const QuadratureGrid& grid = {});

// Differentiable training losses -------------------------------------------
//
// Query batches have Q rows; noise has Q * s rows ordered query-major (the s
// draws for query 0 first). Each function returns a [Q, 1] column of
// estimated log p(target_q | x_q, S).

Var intersection_log_posterior(const EmbeddingVars& queries, const PrototypeVars& prototypes,
                               const std::vector<std::size_t>& targets, std::size_t samples, const Tensor& noise);

Var naive_log_posterior(const EmbeddingVars& queries, const PrototypeVars& prototypes,
                        const std::vector<std::size_t>& targets, std::size_t samples, const Tensor& noise);

/// Deterministic softmax over log N(mu_x; mu_y, sigma_hat_y^2).
Var deterministic_log_posterior(const Var& query_means, const PrototypeVars& prototypes,
                                const std::vector<std::size_t>& targets);

/// Mean negative log posterior of the targets under the configured sampler.
Var training_loss(const EmbeddingVars& queries, const PrototypeVars& prototypes,
                  const std::vector<std::size_t>& targets, const SamplerConfig& config, const Tensor& noise);

}  // namespace spe
