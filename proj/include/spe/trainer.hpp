#pragma once

// Episodic training loop.
//
// One epoch is a fixed number of episodes. The learning rate halves every
// halve_every_epochs epochs; after each epoch the model is scored on fixed
// validation episodes (same occlusion as training, 200-sample naive
// evaluator for SPE) and the best-scoring parameters are kept. Training
// stops after `patience` epochs without improvement.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spe/classifier.hpp"
#include "spe/corruption.hpp"
#include "spe/dataset.hpp"
#include "spe/encoder.hpp"
#include "spe/episode.hpp"
#include "spe/manifest.hpp"
#include "spe/model.hpp"

namespace spe {

enum class OptimizerKind { kSgdMomentum, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& text);

struct TrainerConfig {
  double learning_rate = 1e-4;
  std::size_t halve_every_epochs = 50;
  std::size_t patience = 10;
  std::size_t max_epochs = 200;
  std::size_t episodes_per_epoch = 100;
  SamplerConfig sampler;
  ModelKind model_kind = ModelKind::kSpe;
  std::uint64_t seed = 0;
  double gamma0 = kDefaultGamma0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double momentum = 0.9;
  /// Occlusion applied to support and query images in training and
  /// validation episodes.
  OcclusionPolicy corruption;
  std::size_t validation_episodes = 200;
  std::size_t eval_samples = 200;
  std::size_t threads = 1;

  void validate() const;
  Manifest echo() const;
  double learning_rate_at(std::size_t epoch) const;
};

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double momentum);

  /// Applies one update in place. grads must match params element-wise.
  void step(std::vector<std::span<double>> params, const std::vector<Tensor>& grads, double learning_rate);

 private:
  OptimizerKind kind_;
  double momentum_;
  double beta2_ = 0.999;
  double epsilon_ = 1e-8;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

/// Mean training loss of one episode batch under the current parameters,
/// with its gradients in EncoderModel::parameters() order.
struct LossAndGradients {
  double loss = 0.0;
  std::vector<Tensor> gradients;
};

LossAndGradients episode_loss(const EncoderModel& model, const EpisodeBatch& batch, ModelKind kind,
                              const SamplerConfig& sampler, const Tensor& noise);

/// Draws sampler noise, computes the loss and applies one optimizer update.
/// Returns the pre-update loss. Throws NumericalError on a non-finite loss or
/// gradient before touching the model, and on non-finite updated parameters.
double train_step(EncoderModel& model, const EpisodeBatch& batch, const TrainerConfig& config, Optimizer& optimizer,
                  double learning_rate, Rng& noise_rng);

struct LogRow {
  std::size_t epoch = 0;
  std::size_t episodes_seen = 0;
  double learning_rate = 0.0;
  double mean_train_loss = 0.0;
  double val_accuracy = 0.0;
  double gamma = 0.0;
  double sigma_eps_sq = 0.0;
};

struct FitResult {
  EncoderModel best;
  std::vector<LogRow> log;
  double best_val_accuracy = 0.0;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const LogRow&)>;

FitResult fit(const EncoderModel& initial, const Dataset& train, const PreparedInputs& train_inputs,
              const Dataset& validation, const PreparedInputs& validation_inputs, const EpisodeSpec& spec,
              const TrainerConfig& config, const EpochCallback& on_epoch = {});

std::string training_log_csv(const std::vector<LogRow>& rows);

}  // namespace spe
