#pragma once

// Class prototypes. An SPE prototype is the product over the support set of
// N(mu_i, sigma_i^2 + sigma_eps^2), i.e. a confidence-weighted average of the
// support embeddings. A PN prototype is the plain mean with unit variance, so
// classification against it is the squared-distance softmax.

#include <cstddef>
#include <span>
#include <vector>

#include "spe/autodiff.hpp"
#include "spe/encoder.hpp"
#include "spe/gaussian.hpp"

namespace spe {

struct Prototype {
  std::size_t class_id = 0;
  DiagonalGaussian posterior;
  /// posterior.variance + sigma_eps^2, frozen at formation time.
  std::vector<double> inflated_variance;

  /// N(posterior.mean, inflated_variance): the class density used for
  /// classification.
  DiagonalGaussian predictive() const { return DiagonalGaussian(posterior.mean(), inflated_variance); }
};

Prototype form_prototype(std::span<const DiagonalGaussian> support, double sigma_eps_sq, std::size_t class_id);

Prototype form_pn_prototype(std::span<const std::vector<double>> support_means, std::size_t class_id);

// Differentiable path -------------------------------------------------------

struct PrototypeVars {
  Var mean;               // [n, d]
  Var inflated_variance;  // [n, d]
};

/// One prototype per entry of class_rows, each formed from the listed rows
/// of the support embedding batch.
PrototypeVars form_prototypes(const EmbeddingVars& support, const std::vector<std::vector<std::size_t>>& class_rows,
                              const Var& sigma_eps_sq);

PrototypeVars form_pn_prototypes(const Var& support_mean, const std::vector<std::vector<std::size_t>>& class_rows);

}  // namespace spe
