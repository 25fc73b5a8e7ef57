#include "spe/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "spe/classifier.hpp"
#include "spe/errors.hpp"
#include "spe/prototype.hpp"

namespace spe {

namespace {

constexpr std::uint64_t kNoiseStream = 0x5a3d1e;

struct EncodedBatch {
  std::vector<DiagonalGaussian> support;
  std::vector<DiagonalGaussian> queries;
};

std::vector<DiagonalGaussian> encode_rows(const EncoderModel& encoder, const Tensor& inputs) {
  std::vector<DiagonalGaussian> out;
  out.reserve(inputs.rows());
  for (std::size_t r = 0; r < inputs.rows(); ++r) out.push_back(encode(encoder, inputs.row_view(r)));
  return out;
}

std::string format_fixed(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

double log_choose(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace

void EvalConfig::validate() const {
  if (episodes == 0) throw ConfigError("evaluation needs at least 1 episode");
  if (eval_samples == 0) throw ConfigError("evaluation needs at least 1 sample per query");
  spec.validate();
  support_policy.validate();
  query_policy.validate();
}

Manifest EvalConfig::echo() const {
  Manifest m;
  m.set("model_kind", to_string(model_kind));
  m.set_uint("episodes", episodes);
  m.set_uint("ways", spec.ways);
  m.set_uint("shots", spec.shots);
  m.set_uint("queries_per_class", spec.queries_per_class);
  m.set_uint("eval_samples", eval_samples);
  m.set("support", to_string(support_policy.mode));
  m.set("query", to_string(query_policy.mode));
  m.set_double("support_probability", support_policy.per_unit_probability);
  m.set_double("query_probability", query_policy.per_unit_probability);
  m.set_uint("support_unit", support_policy.unit_size);
  m.set_uint("query_unit", query_policy.unit_size);
  return m;
}

std::string EvalReport::to_text() const {
  Manifest m = echo;
  m.set_double("mean_accuracy", mean_accuracy);
  m.set_double("std_error", std_error);
  m.set_uint("episode_count", per_episode_accuracy.size());
  for (std::size_t i = 0; i < per_episode_accuracy.size(); ++i) {
    m.set_double("episode." + std::to_string(i), per_episode_accuracy[i]);
  }
  return m.to_string();
}

EvalReport summarize(std::vector<double> per_episode, Manifest echo) {
  EvalReport report;
  report.echo = std::move(echo);
  report.per_episode_accuracy = std::move(per_episode);
  const auto n = report.per_episode_accuracy.size();
  if (n == 0) return report;
  double total = 0.0;
  for (double a : report.per_episode_accuracy) total += a;
  report.mean_accuracy = total / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double a : report.per_episode_accuracy) ss += (a - report.mean_accuracy) * (a - report.mean_accuracy);
    report.std_error = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  }
  return report;
}

double episode_accuracy(const EncoderModel& encoder, const EpisodeBatch& batch, ModelKind kind,
                        std::size_t eval_samples, Rng& noise_rng) {
  const auto support = encode_rows(encoder, batch.support);
  const auto queries = encode_rows(encoder, batch.queries);
  std::vector<Prototype> prototypes;
  for (std::size_t w = 0; w < batch.class_rows.size(); ++w) {
    if (kind == ModelKind::kPn) {
      std::vector<std::vector<double>> means;
      for (auto r : batch.class_rows[w]) means.push_back(support[r].mean());
      prototypes.push_back(form_pn_prototype(means, w));
    } else {
      std::vector<DiagonalGaussian> members;
      for (auto r : batch.class_rows[w]) members.push_back(support[r]);
      prototypes.push_back(form_prototype(members, sigma_epsilon_sq(encoder), w));
    }
  }
  std::size_t correct = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    ClassPosterior posterior;
    if (kind == ModelKind::kPn) {
      posterior = deterministic_posterior(queries[q].mean(), prototypes);
    } else {
      const auto noise = standard_normal(eval_samples, encoder.config.embed_dim, noise_rng);
      posterior = naive_posterior(queries[q], prototypes, noise);
    }
    correct += posterior.predicted() == batch.targets[q] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(queries.size());
}

EvalReport evaluate(const EncoderModel& encoder, const Dataset& dataset, const PreparedInputs& prepared,
                    const EvalConfig& config, std::uint64_t seed, std::size_t threads) {
  config.validate();
  if (prepared.dim != encoder.config.input_dim) {
    throw ConfigError("model expects " + std::to_string(encoder.config.input_dim) + " inputs, dataset provides " +
                      std::to_string(prepared.dim));
  }
  const ClassIndex index(dataset);
  index.check(config.spec);
  std::vector<double> accuracy(config.episodes, 0.0);
  auto run_one = [&](std::size_t e) {
    Rng rng = derive_rng(seed, e);
    Rng noise_rng = derive_rng(derive_seed(seed, e), kNoiseStream);
    const auto episode = sample_episode(index, config.spec, rng);
    const auto batch = materialize(dataset, prepared, episode, config.support_policy, config.query_policy, rng);
    accuracy[e] = episode_accuracy(encoder, batch, config.model_kind, config.eval_samples, noise_rng);
  };
  const auto workers = std::clamp<std::size_t>(threads, 1, config.episodes);
  if (workers == 1) {
    for (std::size_t e = 0; e < config.episodes; ++e) run_one(e);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t e = next++; e < config.episodes; e = next++) {
          try {
            run_one(e);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = config.episodes;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  auto echo = config.echo();
  echo.set_uint("seed", seed);
  return summarize(std::move(accuracy), std::move(echo));
}

double sign_test_p_value(std::size_t positives, std::size_t negatives) {
  const auto n = positives + negatives;
  if (n == 0) return 1.0;
  std::vector<double> terms;
  for (std::size_t k = positives; k <= n; ++k) {
    terms.push_back(log_choose(n, k) - static_cast<double>(n) * std::log(2.0));
  }
  return std::min(1.0, std::exp(log_sum_exp(terms)));
}

PairedReport compare(const EvalReport& first, const EvalReport& second) {
  if (first.per_episode_accuracy.size() != second.per_episode_accuracy.size()) {
    throw DimensionError("paired comparison needs equal episode counts");
  }
  PairedReport out;
  out.first = first;
  out.second = second;
  for (std::size_t i = 0; i < first.per_episode_accuracy.size(); ++i) {
    const double d = first.per_episode_accuracy[i] - second.per_episode_accuracy[i];
    out.deltas.push_back(d);
    if (d > 0.0) {
      ++out.positives;
    } else if (d < 0.0) {
      ++out.negatives;
    } else {
      ++out.ties;
    }
  }
  out.p_value = sign_test_p_value(out.positives, out.negatives);
  return out;
}

std::string PairedReport::to_text() const {
  Manifest m;
  m.set("first.model_kind", first.echo.get("model_kind"));
  m.set("second.model_kind", second.echo.get("model_kind"));
  for (const auto& [k, v] : first.echo.entries()) {
    if (k != "model_kind") m.set(k, v);
  }
  m.set_double("first.mean_accuracy", first.mean_accuracy);
  m.set_double("first.std_error", first.std_error);
  m.set_double("second.mean_accuracy", second.mean_accuracy);
  m.set_double("second.std_error", second.std_error);
  m.set_double("mean_delta", first.mean_accuracy - second.mean_accuracy);
  m.set_uint("positives", positives);
  m.set_uint("negatives", negatives);
  m.set_uint("ties", ties);
  m.set_double("sign_test_p", p_value);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    m.set("episode." + std::to_string(i), format_fixed(first.per_episode_accuracy[i]) + "," +
                                              format_fixed(second.per_episode_accuracy[i]) + "," +
                                              format_fixed(deltas[i]));
  }
  return m.to_string();
}

std::string to_string(SweepNoise kind) { return kind == SweepNoise::kHue ? "hue" : "leg"; }

SweepNoise parse_sweep_noise(const std::string& text) {
  if (text == "hue") return SweepNoise::kHue;
  if (text == "leg") return SweepNoise::kLeg;
  throw ConfigError("unknown sweep noise '" + text + "' (expected hue or leg)");
}

std::vector<SweepRow> uncertainty_sweep(const Model& model, const SyntheticSpec& spec, SweepNoise kind,
                                        const std::vector<double>& levels, std::size_t samples_per_level,
                                        std::uint64_t seed) {
  const auto d = model.encoder.config.embed_dim;
  if (d != 2) throw DimensionError("uncertainty sweeps need a 2-D embedding, model has " + std::to_string(d));
  if (model.transform.mode != InputMode::kPixels) throw ConfigError("uncertainty sweeps need a pixel-mode model");
  if (samples_per_level == 0) throw ConfigError("sweep needs at least 1 sample per level");
  SyntheticSpec render_spec = spec;
  render_spec.image_size = model.transform.image.height;
  std::vector<SweepRow> rows;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const double level = levels[l];
    RenderParams params;
    if (kind == SweepNoise::kHue) {
      if (level < 0.0) throw ConfigError("hue noise levels must be non-negative");
      if (level > 0.0) params.hue_noise_std = level;
    } else {
      if (!(level > 0.0 && level <= 1.0)) throw ConfigError("leg levels must lie in (0, 1]");
      params.leg_fraction = level;
    }
    SweepRow row{level, std::vector<double>(d, 0.0)};
    std::size_t count = 0;
    for (std::size_t c = 0; c < kSyntheticClasses; ++c) {
      const auto center = class_center(render_spec, c);
      params.orientation = center.orientation;
      params.hue = center.hue;
      for (std::size_t s = 0; s < samples_per_level; ++s) {
        Rng rng = derive_rng(derive_seed(seed, l), c * samples_per_level + s);
        const auto image = render(render_spec, params, rng);
        const auto g = encode(model.encoder, model.transform.apply(image));
        for (std::size_t a = 0; a < d; ++a) row.mean_variance[a] += g.variance()[a];
        ++count;
      }
    }
    for (double& v : row.mean_variance) v /= static_cast<double>(count);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, std::size_t embed_dim) {
  std::string out = "level";
  for (std::size_t a = 0; a < embed_dim; ++a) out += ",var_axis" + std::to_string(a);
  out += "\n";
  for (const auto& row : rows) {
    out += format_double(row.level);
    for (double v : row.mean_variance) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

SweepCheck check_hue_sweep(const std::vector<SweepRow>& rows) {
  SweepCheck check;
  if (rows.size() < 2) {
    check.message = "hue sweep needs at least 2 levels";
    return check;
  }
  const auto& first = rows.front().mean_variance;
  const auto& last = rows.back().mean_variance;
  check.aligned_axis = (last[0] - first[0]) >= (last[1] - first[1]) ? 0 : 1;
  const auto a = check.aligned_axis;
  const auto other = 1 - a;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].mean_variance[a] > rows[i - 1].mean_variance[a])) {
      check.message = "axis " + std::to_string(a) + " variance does not increase at level " +
                      format_double(rows[i].level);
      return check;
    }
  }
  const double rise = last[a] - first[a];
  const double other_rise = last[other] - first[other];
  if (!(other_rise < 0.5 * rise)) {
    check.message = "axis " + std::to_string(other) + " rises by " + format_double(other_rise) +
                    ", not less than half of " + format_double(rise);
    return check;
  }
  check.ok = true;
  check.message = "axis " + std::to_string(a) + " rises by " + format_double(rise) + ", axis " +
                  std::to_string(other) + " by " + format_double(other_rise);
  return check;
}

SweepCheck check_leg_sweep(const std::vector<SweepRow>& rows) {
  SweepCheck check;
  if (rows.size() < 2) {
    check.message = "leg sweep needs at least 2 levels";
    return check;
  }
  const auto& first = rows.front().mean_variance;
  const auto& last = rows.back().mean_variance;
  for (std::size_t a = 0; a < first.size(); ++a) {
    if (!(last[a] > first[a])) {
      check.message = "axis " + std::to_string(a) + " variance at level " + format_double(rows.back().level) +
                      " does not exceed the baseline";
      return check;
    }
  }
  check.ok = true;
  check.message = "all axes exceed the baseline at level " + format_double(rows.back().level);
  return check;
}

std::string embeddings_csv(const EncoderModel& encoder, const Dataset& dataset, const PreparedInputs& prepared) {
  if (prepared.dim != encoder.config.input_dim) throw ConfigError("model and dataset input sizes differ");
  const auto d = encoder.config.embed_dim;
  std::string out = "id,label,orientation,hue";
  for (std::size_t a = 0; a < d; ++a) out += ",mu_" + std::to_string(a);
  for (std::size_t a = 0; a < d; ++a) out += ",var_" + std::to_string(a);
  out += "\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto g = encode(encoder, prepared.row(i));
    out += std::to_string(i) + "," + std::to_string(dataset.labels[i]) + "," +
           format_double(dataset.latents[i][0]) + "," + format_double(dataset.latents[i][1]);
    for (double m : g.mean()) out += "," + format_double(m);
    for (double v : g.variance()) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

}  // namespace spe
