#include "spe/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spe/errors.hpp"

namespace spe {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require_dim(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(got) + " does not match " +
                         std::to_string(expected));
  }
}

}  // namespace

DiagonalGaussian::DiagonalGaussian(std::vector<double> mean, std::vector<double> variance)
    : mean_(std::move(mean)), variance_(std::move(variance)) {
  require_dim(mean_.size(), variance_.size(), "DiagonalGaussian");
  for (double& v : variance_) {
    if (!std::isfinite(v) || v < 0.0) throw NumericalError("DiagonalGaussian: invalid variance " + std::to_string(v));
    v = std::max(v, kVarianceFloor);
  }
  for (double m : mean_) {
    if (!std::isfinite(m)) throw NumericalError("DiagonalGaussian: non-finite mean");
  }
}

DiagonalGaussian DiagonalGaussian::isotropic(std::vector<double> mean, double variance) {
  std::vector<double> var(mean.size(), variance);
  return DiagonalGaussian(std::move(mean), std::move(var));
}

double log_density(const DiagonalGaussian& g, std::span<const double> z) {
  require_dim(g.dim(), z.size(), "log_density");
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double diff = z[i] - g.mean()[i];
    acc += kLog2Pi + std::log(g.variance()[i]) + diff * diff / g.variance()[i];
  }
  return -0.5 * acc;
}

std::vector<double> sample(const DiagonalGaussian& g, std::span<const double> u) {
  require_dim(g.dim(), u.size(), "sample");
  std::vector<double> z(g.dim());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = g.mean()[i] + std::sqrt(g.variance()[i]) * u[i];
  return z;
}

DiagonalGaussian product(std::span<const DiagonalGaussian> gs) {
  if (gs.empty()) throw DimensionError("product: empty list of Gaussians");
  const auto d = gs.front().dim();
  std::vector<double> precision(d, 0.0);
  std::vector<double> weighted(d, 0.0);
  for (const auto& g : gs) {
    require_dim(d, g.dim(), "product");
    for (std::size_t i = 0; i < d; ++i) {
      const double p = 1.0 / g.variance()[i];
      precision[i] += p;
      weighted[i] += p * g.mean()[i];
    }
  }
  std::vector<double> mean(d);
  std::vector<double> variance(d);
  for (std::size_t i = 0; i < d; ++i) {
    variance[i] = 1.0 / precision[i];
    mean[i] = variance[i] * weighted[i];
  }
  return DiagonalGaussian(std::move(mean), std::move(variance));
}

IntersectionFactor product_identity_factor(const DiagonalGaussian& x, const DiagonalGaussian& y) {
  require_dim(x.dim(), y.dim(), "product_identity_factor");
  const DiagonalGaussian pair[] = {x, y};
  IntersectionFactor out{product(pair), 0.0};
  std::vector<double> summed(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) summed[i] = x.variance()[i] + y.variance()[i];
  out.log_prefactor = log_density(DiagonalGaussian(y.mean(), std::move(summed)), x.mean());
  return out;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

}  // namespace spe
