#pragma once

// Feed-forward encoder mapping an input vector to a diagonal-Gaussian
// embedding. The last layer has 2d outputs: the first d are the mean, the
// last d pass through softplus (plus the variance floor) to give the
// variance. The model also owns gamma, the pre-softplus prototype noise
// variance.

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "spe/autodiff.hpp"
#include "spe/gaussian.hpp"
#include "spe/manifest.hpp"
#include "spe/tensor.hpp"

namespace spe {

inline constexpr double kDefaultGamma0 = 0.01;

struct EncoderConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t embed_dim = 2;

  /// Throws ConfigError for zero widths.
  void validate() const;
  /// input_dim, hidden..., 2 * embed_dim.
  std::vector<std::size_t> layer_widths() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct DenseLayer {
  Tensor weight;  // [fan_in, fan_out]
  Tensor bias;    // [1, fan_out]
};

struct EncoderModel {
  EncoderConfig config;
  std::vector<DenseLayer> layers;
  double gamma = 0.0;
  std::uint64_t seed = 0;

  /// Views over every trainable value: weight and bias of each layer in
  /// order, then gamma as a one-element span.
  std::vector<std::span<double>> parameters();
  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases;
/// gamma = support_count * gamma0^(2/d).
EncoderModel init_encoder(const EncoderConfig& config, std::size_t episode_support_count, double gamma0,
                          std::uint64_t seed);

/// Same architecture with every weight, bias and gamma set to zero.
EncoderModel zero_encoder(const EncoderConfig& config);

double initial_gamma(std::size_t episode_support_count, double gamma0, std::size_t embed_dim);

/// Inference path (no tape).
DiagonalGaussian encode(const EncoderModel& model, std::span<const double> x);

/// softplus(gamma), the prototype perturbation variance.
double sigma_epsilon_sq(const EncoderModel& model);
double softplus(double x);

// Differentiable path -------------------------------------------------------

struct EncoderVars {
  std::vector<std::pair<Var, Var>> layers;  // (weight, bias)
  Var gamma;                                // [1,1]
};

struct EmbeddingVars {
  Var mean;      // [N, d]
  Var variance;  // [N, d]
};

EncoderVars bind_parameters(Tape& tape, const EncoderModel& model);
/// Encodes each row of inputs ([N, input_dim]).
EmbeddingVars encode_batch(const EncoderVars& vars, const Var& inputs);
Var sigma_epsilon_sq(const EncoderVars& vars);
/// Gradients in the order of EncoderModel::parameters().
std::vector<Tensor> collect_gradients(const Gradients& grads, const EncoderVars& vars);

// Serialization -------------------------------------------------------------

/// Writes <dir>/model.manifest and <dir>/model.params.f32. Parameters are
/// stored as little-endian float32 in layer order (weight then bias); gamma
/// lives in the manifest. Extra entries are appended to the manifest.
void save_encoder(const std::filesystem::path& dir, const EncoderModel& model, const Manifest& extra = {});

struct LoadedEncoder {
  EncoderModel model;
  Manifest manifest;
};

LoadedEncoder load_encoder(const std::filesystem::path& dir);

}  // namespace spe
