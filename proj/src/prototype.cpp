#include "spe/prototype.hpp"

#include "spe/errors.hpp"

namespace spe {

Prototype form_prototype(std::span<const DiagonalGaussian> support, double sigma_eps_sq, std::size_t class_id) {
  if (support.empty()) throw DimensionError("form_prototype: empty support set");
  if (!(sigma_eps_sq > 0.0)) throw ConfigError("form_prototype: sigma_eps^2 must be positive");
  std::vector<DiagonalGaussian> inflated;
  inflated.reserve(support.size());
  for (const auto& s : support) {
    std::vector<double> var = s.variance();
    for (double& v : var) v += sigma_eps_sq;
    inflated.emplace_back(s.mean(), std::move(var));
  }
  Prototype p{class_id, product(inflated), {}};
  p.inflated_variance = p.posterior.variance();
  for (double& v : p.inflated_variance) v += sigma_eps_sq;
  return p;
}

Prototype form_pn_prototype(std::span<const std::vector<double>> support_means, std::size_t class_id) {
  if (support_means.empty()) throw DimensionError("form_pn_prototype: empty support set");
  const auto d = support_means.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& m : support_means) {
    if (m.size() != d) throw DimensionError("form_pn_prototype: support means differ in dimension");
    for (std::size_t i = 0; i < d; ++i) mean[i] += m[i];
  }
  for (double& v : mean) v /= static_cast<double>(support_means.size());
  return Prototype{class_id, DiagonalGaussian(std::move(mean), std::vector<double>(d, 1.0)),
                   std::vector<double>(d, 1.0)};
}

PrototypeVars form_prototypes(const EmbeddingVars& support, const std::vector<std::vector<std::size_t>>& class_rows,
                              const Var& sigma_eps_sq) {
  if (class_rows.empty()) throw DimensionError("form_prototypes: no classes");
  std::vector<Var> means;
  std::vector<Var> variances;
  for (const auto& rows : class_rows) {
    if (rows.empty()) throw DimensionError("form_prototypes: empty support set");
    const Var precision = reciprocal(gather_rows(support.variance, rows) + sigma_eps_sq);
    const Var variance = reciprocal(sum(precision, 0));
    means.push_back(variance * sum(precision * gather_rows(support.mean, rows), 0));
    variances.push_back(variance + sigma_eps_sq);
  }
  return {concat(means, 0), concat(variances, 0)};
}

PrototypeVars form_pn_prototypes(const Var& support_mean, const std::vector<std::vector<std::size_t>>& class_rows) {
  if (class_rows.empty()) throw DimensionError("form_pn_prototypes: no classes");
  std::vector<Var> means;
  for (const auto& rows : class_rows) {
    if (rows.empty()) throw DimensionError("form_pn_prototypes: empty support set");
    means.push_back(mul(sum(gather_rows(support_mean, rows), 0), 1.0 / static_cast<double>(rows.size())));
  }
  Var mean = concat(means, 0);
  Var unit = support_mean.tape()->constant(Tensor(mean.shape(), 1.0));
  return {mean, unit};
}

}  // namespace spe
