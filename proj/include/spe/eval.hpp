#pragma once

// Episodic evaluation, paired SPE-vs-PN comparison, uncertainty sweeps and
// embedding export.
//
// Episode e draws its classes, instances and occlusions from
// derive_rng(seed, e) and its sampler noise from a separate stream, so two
// models evaluated with the same seed see identical episodes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spe/corruption.hpp"
#include "spe/dataset.hpp"
#include "spe/encoder.hpp"
#include "spe/episode.hpp"
#include "spe/manifest.hpp"
#include "spe/model.hpp"
#include "spe/synthetic.hpp"

namespace spe {

struct EvalConfig {
  std::size_t episodes = 1000;
  EpisodeSpec spec;
  OcclusionPolicy support_policy;
  OcclusionPolicy query_policy;
  std::size_t eval_samples = 200;
  ModelKind model_kind = ModelKind::kSpe;

  void validate() const;
  Manifest echo() const;
};

struct EvalReport {
  double mean_accuracy = 0.0;
  double std_error = 0.0;
  std::vector<double> per_episode_accuracy;
  Manifest echo;

  /// key = value lines, then one "episode.<i> = <accuracy>" line per episode.
  std::string to_text() const;
};

/// Mean and standard error (sample std / sqrt(n)) of per-episode values.
EvalReport summarize(std::vector<double> per_episode, Manifest echo);

/// Runs config.episodes episodes on up to `threads` workers; the result does
/// not depend on the thread count.
EvalReport evaluate(const EncoderModel& encoder, const Dataset& dataset, const PreparedInputs& prepared,
                    const EvalConfig& config, std::uint64_t seed, std::size_t threads = 1);

/// Accuracy of one materialized episode.
double episode_accuracy(const EncoderModel& encoder, const EpisodeBatch& batch, ModelKind kind,
                        std::size_t eval_samples, Rng& noise_rng);

/// P(X >= positives) for X ~ Binomial(positives + negatives, 1/2).
double sign_test_p_value(std::size_t positives, std::size_t negatives);

struct PairedReport {
  EvalReport first;
  EvalReport second;
  std::vector<double> deltas;  // first - second, per episode
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t ties = 0;
  /// One-sided: evidence that first beats second.
  double p_value = 1.0;

  std::string to_text() const;
};

PairedReport compare(const EvalReport& first, const EvalReport& second);

enum class SweepNoise { kHue, kLeg };

std::string to_string(SweepNoise kind);
SweepNoise parse_sweep_noise(const std::string& text);

struct SweepRow {
  double level = 0.0;
  std::vector<double> mean_variance;  // per embedding axis
};

/// For each level, renders samples_per_level images at each class center
/// with that corruption (hue: noise std in degrees; leg: leg fraction),
/// encodes them and averages the predicted variance per axis.
std::vector<SweepRow> uncertainty_sweep(const Model& model, const SyntheticSpec& spec, SweepNoise kind,
                                        const std::vector<double>& levels, std::size_t samples_per_level,
                                        std::uint64_t seed);

std::string sweep_csv(const std::vector<SweepRow>& rows, std::size_t embed_dim);

struct SweepCheck {
  bool ok = false;
  std::size_t aligned_axis = 0;
  std::string message;
};

/// Hue sweep: some axis rises strictly at every level while the other
/// axis's total rise is less than half of it. Needs at least 2 rows.
SweepCheck check_hue_sweep(const std::vector<SweepRow>& rows);
/// Leg sweep: every axis at the last level exceeds the first (baseline) row.
SweepCheck check_leg_sweep(const std::vector<SweepRow>& rows);

/// CSV: id,label,orientation,hue,mu_0..,var_0.. with one row per instance.
std::string embeddings_csv(const EncoderModel& encoder, const Dataset& dataset, const PreparedInputs& prepared);

}  // namespace spe
