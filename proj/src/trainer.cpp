#include "spe/trainer.hpp"

#include <cmath>
#include <sstream>

#include "spe/errors.hpp"
#include "spe/eval.hpp"
#include "spe/prototype.hpp"

namespace spe {

namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kValidationStream = 2;
constexpr std::uint64_t kNoiseStream = 3;

}  // namespace

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgdMomentum ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(const std::string& text) {
  if (text == "sgd") return OptimizerKind::kSgdMomentum;
  if (text == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + text + "' (expected sgd or adam)");
}

void TrainerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and non-negative");
  }
  if (halve_every_epochs == 0) throw ConfigError("halve-every must be at least 1 epoch");
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (episodes_per_epoch == 0) throw ConfigError("epochs need at least 1 episode");
  if (!(gamma0 > 0.0)) throw ConfigError("gamma0 must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (validation_episodes == 0) throw ConfigError("validation needs at least 1 episode");
  if (eval_samples == 0) throw ConfigError("eval samples must be at least 1");
  sampler.validate();
  corruption.validate();
}

Manifest TrainerConfig::echo() const {
  Manifest m;
  m.set("model_kind", to_string(model_kind));
  m.set("sampler", to_string(sampler.method));
  m.set_uint("samples", sampler.samples_per_query);
  m.set("optimizer", to_string(optimizer));
  m.set_double("learning_rate", learning_rate);
  m.set_double("momentum", momentum);
  m.set_uint("halve_every_epochs", halve_every_epochs);
  m.set_uint("patience", patience);
  m.set_uint("max_epochs", max_epochs);
  m.set_uint("episodes_per_epoch", episodes_per_epoch);
  m.set_double("gamma0", gamma0);
  m.set("train_corruption", to_string(corruption.mode));
  m.set_double("train_corruption_probability", corruption.per_unit_probability);
  m.set_uint("train_corruption_unit", corruption.unit_size);
  m.set_uint("validation_episodes", validation_episodes);
  m.set_uint("eval_samples", eval_samples);
  m.set_uint("seed", seed);
  return m;
}

double TrainerConfig::learning_rate_at(std::size_t epoch) const {
  const auto halvings = (epoch - 1) / halve_every_epochs;
  return std::ldexp(learning_rate, -static_cast<int>(halvings));
}

Optimizer::Optimizer(OptimizerKind kind, double momentum) : kind_(kind), momentum_(momentum) {}

void Optimizer::step(std::vector<std::span<double>> params, const std::vector<Tensor>& grads, double learning_rate) {
  if (params.size() != grads.size()) throw DimensionError("optimizer: parameter and gradient counts differ");
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.emplace_back(p.size(), 0.0);
      second_.emplace_back(kind_ == OptimizerKind::kAdam ? p.size() : 0, 0.0);
    }
  }
  ++steps_;
  const double bias1 = 1.0 - std::pow(momentum_, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    const auto g = grads[i].data();
    if (g.size() != p.size()) throw DimensionError("optimizer: gradient shape differs from its parameter");
    auto& m = first_[i];
    if (kind_ == OptimizerKind::kSgdMomentum) {
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = momentum_ * m[j] + g[j];
        p[j] -= learning_rate * m[j];
      }
    } else {
      auto& v = second_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = momentum_ * m[j] + (1.0 - momentum_) * g[j];
        v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
        p[j] -= learning_rate * (m[j] / bias1) / (std::sqrt(v[j] / bias2) + epsilon_);
      }
    }
  }
}

LossAndGradients episode_loss(const EncoderModel& model, const EpisodeBatch& batch, ModelKind kind,
                              const SamplerConfig& sampler, const Tensor& noise) {
  Tape tape;
  const auto vars = bind_parameters(tape, model);
  const auto support = encode_batch(vars, tape.constant(batch.support));
  const auto queries = encode_batch(vars, tape.constant(batch.queries));
  Var loss;
  if (kind == ModelKind::kPn) {
    const auto prototypes = form_pn_prototypes(support.mean, batch.class_rows);
    loss = -mean(deterministic_log_posterior(queries.mean, prototypes, batch.targets));
  } else {
    const auto prototypes = form_prototypes(support, batch.class_rows, sigma_epsilon_sq(vars));
    loss = training_loss(queries, prototypes, batch.targets, sampler, noise);
  }
  LossAndGradients out;
  out.loss = loss.value().item();
  const auto grads = tape.backward(loss);
  out.gradients = collect_gradients(grads, vars);
  return out;
}

double train_step(EncoderModel& model, const EpisodeBatch& batch, const TrainerConfig& config, Optimizer& optimizer,
                  double learning_rate, Rng& noise_rng) {
  const auto rows = batch.queries.rows() * config.sampler.samples_per_query;
  const auto noise = standard_normal(rows, model.config.embed_dim, noise_rng);
  auto result = episode_loss(model, batch, config.model_kind, config.sampler, noise);
  if (!std::isfinite(result.loss)) throw NumericalError("training loss is not finite");
  for (const auto& g : result.gradients) {
    if (!g.all_finite()) throw NumericalError("training gradient is not finite");
  }
  optimizer.step(model.parameters(), result.gradients, learning_rate);
  if (!model.all_finite()) throw NumericalError("parameters became non-finite after an update");
  return result.loss;
}

FitResult fit(const EncoderModel& initial, const Dataset& train, const PreparedInputs& train_inputs,
              const Dataset& validation, const PreparedInputs& validation_inputs, const EpisodeSpec& spec,
              const TrainerConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const ClassIndex index(train);
  index.check(spec);
  FitResult result;
  result.best = initial;
  if (config.max_epochs == 0) return result;

  EvalConfig val_config;
  val_config.episodes = config.validation_episodes;
  val_config.spec = spec;
  val_config.eval_samples = config.eval_samples;
  val_config.model_kind = config.model_kind;
  // Validation sees the training corruption so model selection matches the
  // regime being trained for.
  val_config.support_policy = config.corruption;
  val_config.query_policy = config.corruption;
  const auto val_seed = derive_seed(config.seed, kValidationStream);
  const auto train_seed = derive_seed(config.seed, kTrainStream);

  EncoderModel model = initial;
  Optimizer optimizer(config.optimizer, config.momentum);
  double best = -1.0;
  std::size_t stale = 0;
  std::size_t seen = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = config.learning_rate_at(epoch);
    double total_loss = 0.0;
    for (std::size_t i = 0; i < config.episodes_per_epoch; ++i, ++seen) {
      Rng rng = derive_rng(train_seed, seen);
      Rng noise_rng = derive_rng(derive_seed(train_seed, seen), kNoiseStream);
      const auto episode = sample_episode(index, spec, rng);
      const auto batch = materialize(train, train_inputs, episode, config.corruption, config.corruption, rng);
      try {
        total_loss += train_step(model, batch, config, optimizer, lr, noise_rng);
      } catch (const NumericalError& e) {
        std::ostringstream os;
        os << e.what() << " (epoch " << epoch << ", episode " << seen << ", gamma " << model.gamma << ")";
        throw NumericalError(os.str());
      }
    }
    const auto report = evaluate(model, validation, validation_inputs, val_config, val_seed, config.threads);
    LogRow row{epoch,
               seen,
               lr,
               total_loss / static_cast<double>(config.episodes_per_epoch),
               report.mean_accuracy,
               model.gamma,
               sigma_epsilon_sq(model)};
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
    if (report.mean_accuracy > best) {
      best = report.mean_accuracy;
      result.best = model;
      result.best_val_accuracy = best;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

std::string training_log_csv(const std::vector<LogRow>& rows) {
  std::string out = "epoch,episodes_seen,learning_rate,mean_train_loss,val_accuracy,gamma,sigma_eps_sq\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + "," + std::to_string(r.episodes_seen) + "," + format_double(r.learning_rate) +
           "," + format_double(r.mean_train_loss) + "," + format_double(r.val_accuracy) + "," +
           format_double(r.gamma) + "," + format_double(r.sigma_eps_sq) + "\n";
  }
  return out;
}

}  // namespace spe
