#include "spe/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "spe/errors.hpp"

namespace spe {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

std::vector<DiagonalGaussian> predictive_densities(std::span<const Prototype> prototypes, std::size_t dim) {
  if (prototypes.empty()) throw DimensionError("classifier: no prototypes");
  std::vector<DiagonalGaussian> out;
  out.reserve(prototypes.size());
  for (const auto& p : prototypes) {
    if (p.posterior.dim() != dim) throw DimensionError("classifier: prototype dimension differs from query");
    out.push_back(p.predictive());
  }
  return out;
}

void require_noise(const Tensor& noise, std::size_t dim) {
  if (noise.rank() != 2 || noise.cols() != dim) {
    throw DimensionError("noise must have shape [s, " + std::to_string(dim) + "], got " +
                         shape_string(noise.shape()));
  }
}

std::vector<double> log_softmax_of(std::span<const double> z, std::span<const DiagonalGaussian> classes) {
  std::vector<double> out(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) out[c] = log_density(classes[c], z);
  const double norm = log_sum_exp(out);
  for (double& v : out) v -= norm;
  return out;
}

// [M, n] matrix of log N(z_m; mean_c, variance_c).
Var class_log_densities(const Var& z, const PrototypeVars& prototypes) {
  const auto n = prototypes.mean.rows();
  const auto d = z.cols();
  Tape& tape = *z.tape();
  Var log_2pi = tape.constant(Tensor::scalar(kLog2Pi * static_cast<double>(d)));
  std::vector<Var> columns;
  columns.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    const Var mu = slice(prototypes.mean, 0, c, c + 1);
    const Var var = slice(prototypes.inflated_variance, 0, c, c + 1);
    const Var mahalanobis = sum(square(z - mu) / var, 1);
    columns.push_back(mul(mahalanobis + sum(log(var)) + log_2pi, -0.5));
  }
  return concat(columns, 1);
}

std::vector<std::size_t> repeated_rows(std::size_t queries, std::size_t samples) {
  std::vector<std::size_t> rows;
  rows.reserve(queries * samples);
  for (std::size_t q = 0; q < queries; ++q) rows.insert(rows.end(), samples, q);
  return rows;
}

void check_targets(const std::vector<std::size_t>& targets, std::size_t queries, std::size_t classes) {
  if (targets.size() != queries) throw DimensionError("one target per query required");
  for (auto t : targets) {
    if (t >= classes) throw DimensionError("target class index out of range");
  }
}

// Selects column targets[m / samples] from each row of a [Q*s, n] matrix.
Var pick_targets(const Var& matrix, const std::vector<std::size_t>& targets, std::size_t samples) {
  Tensor mask(matrix.shape(), 0.0);
  for (std::size_t m = 0; m < mask.rows(); ++m) mask(m, targets[m / samples]) = 1.0;
  return sum(matrix * matrix.tape()->constant(std::move(mask)), 1);
}

}  // namespace

std::string to_string(SamplerMethod method) {
  return method == SamplerMethod::kNaive ? "naive" : "intersection";
}

SamplerMethod parse_sampler_method(const std::string& text) {
  if (text == "naive") return SamplerMethod::kNaive;
  if (text == "intersection") return SamplerMethod::kIntersection;
  throw ConfigError("unknown sampler '" + text + "' (expected naive or intersection)");
}

std::size_t ClassPosterior::predicted() const {
  if (log_probs.empty()) throw DimensionError("empty posterior");
  return static_cast<std::size_t>(std::max_element(log_probs.begin(), log_probs.end()) - log_probs.begin());
}

std::vector<double> ClassPosterior::probabilities() const {
  std::vector<double> out(log_probs.size());
  std::transform(log_probs.begin(), log_probs.end(), out.begin(), [](double v) { return std::exp(v); });
  return out;
}

void SamplerConfig::validate() const {
  if (samples_per_query == 0) throw ConfigError("samples per query must be at least 1");
}

Tensor standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out = Tensor::zeros(rows, cols);
  for (double& v : out.data()) v = normal(rng);
  return out;
}

std::vector<double> conditional_log_softmax(std::span<const double> z, std::span<const Prototype> prototypes) {
  const auto classes = predictive_densities(prototypes, z.size());
  return log_softmax_of(z, classes);
}

ClassPosterior naive_posterior(const DiagonalGaussian& query, std::span<const Prototype> prototypes,
                               const Tensor& noise) {
  const auto classes = predictive_densities(prototypes, query.dim());
  require_noise(noise, query.dim());
  const auto s = noise.rows();
  const auto n = classes.size();
  // Column-major accumulation of per-sample log-softmax values.
  std::vector<std::vector<double>> per_class(n, std::vector<double>(s));
  for (std::size_t j = 0; j < s; ++j) {
    const auto z = sample(query, noise.row_view(j));
    const auto lp = log_softmax_of(z, classes);
    for (std::size_t c = 0; c < n; ++c) per_class[c][j] = lp[c];
  }
  ClassPosterior out{std::vector<double>(n), s, PosteriorMethod::kNaive};
  const double log_s = std::log(static_cast<double>(s));
  for (std::size_t c = 0; c < n; ++c) out.log_probs[c] = log_sum_exp(per_class[c]) - log_s;
  return out;
}

double intersection_posterior(const DiagonalGaussian& query, std::span<const Prototype> prototypes,
                              std::size_t target, const Tensor& noise) {
  const auto classes = predictive_densities(prototypes, query.dim());
  if (target >= classes.size()) throw DimensionError("intersection_posterior: invalid target class");
  require_noise(noise, query.dim());
  const auto factor = product_identity_factor(query, classes[target]);
  const auto s = noise.rows();
  std::vector<double> neg_log_denominator(s);
  std::vector<double> densities(classes.size());
  for (std::size_t j = 0; j < s; ++j) {
    const auto z = sample(factor.intersection, noise.row_view(j));
    for (std::size_t c = 0; c < classes.size(); ++c) densities[c] = log_density(classes[c], z);
    neg_log_denominator[j] = -log_sum_exp(densities);
  }
  return factor.log_prefactor + log_sum_exp(neg_log_denominator) - std::log(static_cast<double>(s));
}

ClassPosterior deterministic_posterior(std::span<const double> z, std::span<const Prototype> prototypes) {
  return ClassPosterior{conditional_log_softmax(z, prototypes), 0, PosteriorMethod::kDeterministic};
}

ClassPosterior quadrature_posterior(const DiagonalGaussian& query, std::span<const Prototype> prototypes,
                                    const QuadratureGrid& grid) {
  const auto d = query.dim();
  if (d == 0 || d > 2) throw DimensionError("quadrature_posterior supports 1-D and 2-D embeddings only");
  if (grid.points_per_axis < 3) throw ConfigError("quadrature grid needs at least 3 points per axis");
  const auto classes = predictive_densities(prototypes, d);
  const auto n = classes.size();
  const auto m = grid.points_per_axis;

  std::vector<std::vector<double>> nodes(d, std::vector<double>(m));
  std::vector<double> step(d);
  for (std::size_t a = 0; a < d; ++a) {
    const double sd = std::sqrt(query.variance()[a]);
    const double lo = query.mean()[a] - grid.half_width_sd * sd;
    step[a] = 2.0 * grid.half_width_sd * sd / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) nodes[a][i] = lo + step[a] * static_cast<double>(i);
  }
  auto trapezoid = [m](std::size_t i) { return (i == 0 || i == m - 1) ? 0.5 : 1.0; };

  std::vector<double> mass(n, 0.0);
  std::vector<double> z(d);
  const std::size_t outer = d == 2 ? m : 1;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < outer; ++k) {
      z[0] = nodes[0][i];
      double weight = trapezoid(i) * step[0];
      if (d == 2) {
        z[1] = nodes[1][k];
        weight *= trapezoid(k) * step[1];
      }
      const double input_density = std::exp(log_density(query, z));
      const auto lp = log_softmax_of(z, classes);
      for (std::size_t c = 0; c < n; ++c) mass[c] += weight * input_density * std::exp(lp[c]);
    }
  }
  double total = 0.0;
  for (double v : mass) total += v;
  ClassPosterior out{std::vector<double>(n), m, PosteriorMethod::kQuadrature};
  for (std::size_t c = 0; c < n; ++c) out.log_probs[c] = std::log(mass[c]) - std::log(total);
  return out;
}

Var intersection_log_posterior(const EmbeddingVars& queries, const PrototypeVars& prototypes,
                               const std::vector<std::size_t>& targets, std::size_t samples, const Tensor& noise) {
  const auto q = queries.mean.rows();
  const auto d = queries.mean.cols();
  check_targets(targets, q, prototypes.mean.rows());
  if (samples == 0 || noise.rank() != 2 || noise.rows() != q * samples || noise.cols() != d) {
    throw DimensionError("intersection_log_posterior: noise must have shape [Q*s, d]");
  }
  Tape& tape = *queries.mean.tape();
  const Var target_mean = gather_rows(prototypes.mean, targets);
  const Var target_var = gather_rows(prototypes.inflated_variance, targets);

  const Var joint_var = reciprocal(reciprocal(queries.variance) + reciprocal(target_var));
  const Var joint_mean = joint_var * (queries.mean / queries.variance + target_mean / target_var);

  const Var summed_var = queries.variance + target_var;
  const Var log_2pi = tape.constant(Tensor::scalar(kLog2Pi));
  const Var log_prefactor =
      mul(sum(log(summed_var) + log_2pi + square(queries.mean - target_mean) / summed_var, 1), -0.5);

  const auto rows = repeated_rows(q, samples);
  const Var z = gather_rows(joint_mean, rows) + gather_rows(sqrt(joint_var), rows) * tape.constant(noise);
  const Var log_denominator = log_sum_exp(class_log_densities(z, prototypes), 1);
  const Var per_query = reshape(-log_denominator, q, samples);
  const Var log_s = tape.constant(Tensor::scalar(std::log(static_cast<double>(samples))));
  return log_prefactor + log_sum_exp(per_query, 1) - log_s;
}

Var naive_log_posterior(const EmbeddingVars& queries, const PrototypeVars& prototypes,
                        const std::vector<std::size_t>& targets, std::size_t samples, const Tensor& noise) {
  const auto q = queries.mean.rows();
  const auto d = queries.mean.cols();
  check_targets(targets, q, prototypes.mean.rows());
  if (samples == 0 || noise.rank() != 2 || noise.rows() != q * samples || noise.cols() != d) {
    throw DimensionError("naive_log_posterior: noise must have shape [Q*s, d]");
  }
  Tape& tape = *queries.mean.tape();
  const auto rows = repeated_rows(q, samples);
  const Var z = gather_rows(queries.mean, rows) + gather_rows(sqrt(queries.variance), rows) * tape.constant(noise);
  const Var logits = class_log_densities(z, prototypes);
  const Var log_softmax = logits - log_sum_exp(logits, 1);
  const Var per_query = reshape(pick_targets(log_softmax, targets, samples), q, samples);
  const Var log_s = tape.constant(Tensor::scalar(std::log(static_cast<double>(samples))));
  return log_sum_exp(per_query, 1) - log_s;
}

Var deterministic_log_posterior(const Var& query_means, const PrototypeVars& prototypes,
                                const std::vector<std::size_t>& targets) {
  check_targets(targets, query_means.rows(), prototypes.mean.rows());
  const Var logits = class_log_densities(query_means, prototypes);
  return pick_targets(logits - log_sum_exp(logits, 1), targets, 1);
}

Var training_loss(const EmbeddingVars& queries, const PrototypeVars& prototypes,
                  const std::vector<std::size_t>& targets, const SamplerConfig& config, const Tensor& noise) {
  config.validate();
  const Var log_post = config.method == SamplerMethod::kIntersection
                           ? intersection_log_posterior(queries, prototypes, targets, config.samples_per_query, noise)
                           : naive_log_posterior(queries, prototypes, targets, config.samples_per_query, noise);
  return -mean(log_post);
}

}  // namespace spe
