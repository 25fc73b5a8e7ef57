#pragma once

#include <span>
#include <vector>

namespace spe {

/// Smallest variance any DiagonalGaussian (and any encoder output) carries.
inline constexpr double kVarianceFloor = 1e-16;

/// N(mean, diag(variance)). Variances below kVarianceFloor are raised to it
/// on construction; negative or non-finite variances are rejected.
class DiagonalGaussian {
 public:
  DiagonalGaussian() = default;
  DiagonalGaussian(std::vector<double> mean, std::vector<double> variance);

  /// Isotropic convenience constructor.
  static DiagonalGaussian isotropic(std::vector<double> mean, double variance);

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& variance() const { return variance_; }

  friend bool operator==(const DiagonalGaussian&, const DiagonalGaussian&) = default;

 private:
  std::vector<double> mean_;
  std::vector<double> variance_;
};

/// log N(z; mean, diag(variance)).
double log_density(const DiagonalGaussian& g, std::span<const double> z);

/// Reparameterized draw mean + sqrt(variance) * u.
std::vector<double> sample(const DiagonalGaussian& g, std::span<const double> u);

/// Normalized product of densities: precisions add, mean is precision-weighted.
DiagonalGaussian product(std::span<const DiagonalGaussian> gs);

/// Factorization N(z; x) N(z; y) = N(z; intersection) * exp(log_prefactor),
/// where log_prefactor = log N(x.mean; y.mean, x.variance + y.variance).
struct IntersectionFactor {
  DiagonalGaussian intersection;
  double log_prefactor = 0.0;
};

IntersectionFactor product_identity_factor(const DiagonalGaussian& x, const DiagonalGaussian& y);

/// Numerically stable log(sum(exp(values))); -inf for an empty range.
double log_sum_exp(std::span<const double> values);

}  // namespace spe
