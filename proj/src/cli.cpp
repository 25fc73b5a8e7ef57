#include "spe/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "spe/dataset.hpp"
#include "spe/errors.hpp"
#include "spe/eval.hpp"
#include "spe/model.hpp"
#include "spe/synthetic.hpp"
#include "spe/trainer.hpp"

namespace spe {

namespace {

namespace fs = std::filesystem;

class VerificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Resolved options in the same "key = value" syntax CLI11 reads back via
// --config. Written by hand so a re-run reproduces the file byte for byte.
class ResolvedConfig {
 public:
  void add(const std::string& key, const std::string& value) { lines_ += key + "=\"" + value + "\"\n"; }
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }
  void add(const std::string& key, double value) { lines_ += key + "=" + format_double(value) + "\n"; }
  void add(const std::string& key, std::uint64_t value) { lines_ += key + "=" + std::to_string(value) + "\n"; }
  void add(const std::string& key, bool value) { lines_ += key + "=" + (value ? "true" : "false") + "\n"; }

  void write(const fs::path& path) const { write_text(path, lines_); }

 private:
  std::string lines_;
};

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != part.size()) throw ConfigError("expected a comma-separated list of integers, got '" + text + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != part.size() || !std::isfinite(v)) throw ConfigError("invalid sweep level '" + part + "'");
    out.push_back(v);
  }
  return out;
}

std::string describe(const EvalReport& r) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << r.mean_accuracy << " +- " << r.std_error;
  return os.str();
}

std::size_t resolve_unit(std::size_t unit, const ImageShape& shape) {
  return unit == 0 ? std::min(shape.height, shape.width) : unit;
}

void add_seed_threads(CLI::App& app, std::uint64_t& seed, std::size_t& threads) {
  app.add_option("--seed", seed, "Base random seed")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads; 1 gives reference results")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

// gen-data -------------------------------------------------------------------

struct GenDataOptions {
  std::size_t per_class = 500;
  std::uint64_t seed = 0;
  std::string out;
  bool feature_mode = false;
  std::size_t image_size = 64;
  double class_std = 30.0;
  double noisy_fraction = 0.15;
  double hue_noise_min = 18.0;
  double hue_noise_max = 54.0;
  double leg_min = 0.10;
  double leg_max = 0.98;
  bool independent_leg_noise = false;
};

void setup_gen_data(CLI::App& app, GenDataOptions& o) {
  app.add_option("--per-class", o.per_class, "Instances per class")->capture_default_str();
  app.add_option("--seed", o.seed, "Generator seed")->capture_default_str();
  app.add_option("--out", o.out, "Output dataset directory")->required();
  app.add_flag("--feature-mode", o.feature_mode, "Store cos/sin latent features instead of pixels");
  app.add_option("--image-size", o.image_size, "Image side in pixels")->capture_default_str();
  app.add_option("--class-std", o.class_std, "Per-axis class spread in degrees")->capture_default_str();
  app.add_option("--noisy-fraction", o.noisy_fraction, "Fraction of instances with added noise")
      ->capture_default_str();
  app.add_option("--hue-noise-min", o.hue_noise_min, "Smallest per-pixel hue noise std (degrees)")
      ->capture_default_str();
  app.add_option("--hue-noise-max", o.hue_noise_max, "Largest per-pixel hue noise std (degrees)")
      ->capture_default_str();
  app.add_option("--leg-min", o.leg_min, "Shortest leg fraction for noisy instances")->capture_default_str();
  app.add_option("--leg-max", o.leg_max, "Longest leg fraction for noisy instances")->capture_default_str();
  app.add_flag("--independent-leg-noise", o.independent_leg_noise,
               "Shorten legs on an independently drawn subset instead of the hue-noisy one");
}

int run_gen_data(const GenDataOptions& o, std::ostream& out) {
  SyntheticSpec spec;
  spec.image_size = o.image_size;
  spec.class_std = o.class_std;
  spec.noisy_fraction = o.noisy_fraction;
  spec.hue_noise_std_range = {o.hue_noise_min, o.hue_noise_max};
  spec.leg_fraction_range = {o.leg_min, o.leg_max};
  spec.bundle_leg_noise = !o.independent_leg_noise;
  spec.mode = o.feature_mode ? InputMode::kFeatures : InputMode::kPixels;
  spec.validate();

  ResolvedConfig cfg;
  cfg.add("per-class", std::uint64_t{o.per_class});
  cfg.add("seed", o.seed);
  cfg.add("out", o.out);
  cfg.add("feature-mode", o.feature_mode);
  cfg.add("image-size", std::uint64_t{o.image_size});
  cfg.add("class-std", o.class_std);
  cfg.add("noisy-fraction", o.noisy_fraction);
  cfg.add("hue-noise-min", o.hue_noise_min);
  cfg.add("hue-noise-max", o.hue_noise_max);
  cfg.add("leg-min", o.leg_min);
  cfg.add("leg-max", o.leg_max);
  cfg.add("independent-leg-noise", o.independent_leg_noise);

  const auto dataset = generate_dataset(spec, o.per_class, o.seed);
  save_dataset(o.out, dataset);
  cfg.write(fs::path(o.out) / "gen-data.ini");
  std::size_t noisy = 0;
  for (const auto& n : dataset.noise) noisy += n.hue_noise_std > 0.0f ? 1 : 0;
  out << "wrote " << dataset.size() << " instances (" << noisy << " with hue noise, " << to_string(dataset.mode)
      << ") to " << o.out << " with seed " << o.seed << "\n";
  return kExitOk;
}

// train ----------------------------------------------------------------------

struct TrainOptions {
  std::string data;
  std::string out;
  std::string model = "spe";
  std::string sampler = "intersection";
  std::size_t samples = 1;
  std::size_t dim = 2;
  std::string hidden = "128,64";
  std::size_t pool = 4;
  std::string optimizer = "adam";
  double lr = 1e-4;
  double momentum = 0.9;
  std::size_t halve_every = 50;
  std::size_t patience = 10;
  std::size_t max_epochs = 200;
  std::size_t episodes_per_epoch = 100;
  std::size_t ways = 4;
  std::size_t shots = 2;
  std::size_t queries = 5;
  double gamma0 = kDefaultGamma0;
  double corruption_prob = 0.2;
  std::size_t corruption_unit = 0;
  double val_fraction = 0.2;
  std::size_t val_episodes = 200;
  std::size_t eval_samples = 200;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool quiet = false;
};

void setup_train(CLI::App& app, TrainOptions& o) {
  app.add_option("--data", o.data, "Dataset directory")->required();
  app.add_option("--out", o.out, "Output model directory")->required();
  app.add_option("--model", o.model, "spe or pn")->capture_default_str();
  app.add_option("--sampler", o.sampler, "intersection or naive (SPE only)")->capture_default_str();
  app.add_option("--samples", o.samples, "Sampler draws per query during training")->capture_default_str();
  app.add_option("--dim", o.dim, "Embedding dimension")->capture_default_str();
  app.add_option("--hidden", o.hidden, "Hidden layer widths, comma-separated")->capture_default_str();
  app.add_option("--pool", o.pool, "Average-pooling factor applied to pixel inputs")->capture_default_str();
  app.add_option("--optimizer", o.optimizer, "adam or sgd (momentum)")->capture_default_str();
  app.add_option("--lr", o.lr, "Initial learning rate")->capture_default_str();
  app.add_option("--momentum", o.momentum, "Momentum (sgd) or first-moment decay (adam)")->capture_default_str();
  app.add_option("--halve-every", o.halve_every, "Epochs between learning-rate halvings")->capture_default_str();
  app.add_option("--patience", o.patience, "Epochs without validation gain before stopping")
      ->capture_default_str();
  app.add_option("--max-epochs", o.max_epochs, "Epoch limit")->capture_default_str();
  app.add_option("--episodes-per-epoch", o.episodes_per_epoch, "Training episodes per epoch")
      ->capture_default_str();
  app.add_option("--ways", o.ways, "Classes per episode")->capture_default_str();
  app.add_option("--shots", o.shots, "Support instances per class")->capture_default_str();
  app.add_option("--queries", o.queries, "Query instances per class")->capture_default_str();
  app.add_option("--gamma0", o.gamma0, "Scale of the initial prototype noise")->capture_default_str();
  app.add_option("--corruption-prob", o.corruption_prob, "Per-unit occlusion probability for training images")
      ->capture_default_str();
  app.add_option("--corruption-unit", o.corruption_unit, "Occlusion unit in pixels; 0 = whole image")
      ->capture_default_str();
  app.add_option("--val-fraction", o.val_fraction, "Per-class fraction held out for validation")
      ->capture_default_str();
  app.add_option("--val-episodes", o.val_episodes, "Validation episodes per epoch")->capture_default_str();
  app.add_option("--eval-samples", o.eval_samples, "Naive-sampler draws per validation query")
      ->capture_default_str();
  add_seed_threads(app, o.seed, o.threads);
  app.add_flag("--quiet", o.quiet, "Do not print per-epoch progress");
}

int run_train(const TrainOptions& o, std::ostream& out) {
  const auto kind = parse_model_kind(o.model);
  SamplerConfig sampler{parse_sampler_method(o.sampler), o.samples};
  sampler.validate();
  const EpisodeSpec spec{o.ways, o.shots, o.queries};
  spec.validate();
  if (!(o.val_fraction > 0.0 && o.val_fraction < 1.0)) throw ConfigError("--val-fraction must lie in (0, 1)");

  ResolvedConfig cfg;
  cfg.add("data", o.data);
  cfg.add("out", o.out);
  cfg.add("model", o.model);
  cfg.add("sampler", o.sampler);
  cfg.add("samples", std::uint64_t{o.samples});
  cfg.add("dim", std::uint64_t{o.dim});
  cfg.add("hidden", o.hidden);
  cfg.add("pool", std::uint64_t{o.pool});
  cfg.add("optimizer", o.optimizer);
  cfg.add("lr", o.lr);
  cfg.add("momentum", o.momentum);
  cfg.add("halve-every", std::uint64_t{o.halve_every});
  cfg.add("patience", std::uint64_t{o.patience});
  cfg.add("max-epochs", std::uint64_t{o.max_epochs});
  cfg.add("episodes-per-epoch", std::uint64_t{o.episodes_per_epoch});
  cfg.add("ways", std::uint64_t{o.ways});
  cfg.add("shots", std::uint64_t{o.shots});
  cfg.add("queries", std::uint64_t{o.queries});
  cfg.add("gamma0", o.gamma0);
  cfg.add("corruption-prob", o.corruption_prob);
  cfg.add("corruption-unit", std::uint64_t{o.corruption_unit});
  cfg.add("val-fraction", o.val_fraction);
  cfg.add("val-episodes", std::uint64_t{o.val_episodes});
  cfg.add("eval-samples", std::uint64_t{o.eval_samples});
  cfg.add("seed", o.seed);
  cfg.add("threads", std::uint64_t{o.threads});
  cfg.add("quiet", o.quiet);

  const auto dataset = load_dataset(o.data);
  auto [train_set, val_set] = split_stratified(dataset, 1.0 - o.val_fraction, derive_seed(o.seed, 10));
  InputTransform transform{dataset.mode, dataset.shape, dataset.mode == InputMode::kPixels ? o.pool : 1};
  const auto train_inputs = prepare_inputs(train_set, transform);
  const auto val_inputs = prepare_inputs(val_set, transform);

  EncoderConfig encoder_config{transform.input_dim(), parse_sizes(o.hidden), o.dim};
  TrainerConfig tc;
  tc.learning_rate = o.lr;
  tc.halve_every_epochs = o.halve_every;
  tc.patience = o.patience;
  tc.max_epochs = o.max_epochs;
  tc.episodes_per_epoch = o.episodes_per_epoch;
  tc.sampler = sampler;
  tc.model_kind = kind;
  tc.seed = o.seed;
  tc.gamma0 = o.gamma0;
  tc.optimizer = parse_optimizer_kind(o.optimizer);
  tc.momentum = o.momentum;
  // Occlusion needs images; feature-mode data trains clean.
  if (dataset.mode == InputMode::kPixels && o.corruption_prob > 0.0) {
    tc.corruption = {o.corruption_prob, resolve_unit(o.corruption_unit, dataset.shape), OcclusionMode::kCorrupt};
  }
  tc.validation_episodes = o.val_episodes;
  tc.eval_samples = o.eval_samples;
  tc.threads = o.threads;
  tc.validate();

  fs::create_directories(o.out);
  cfg.write(fs::path(o.out) / "train.ini");
  const auto initial = init_encoder(encoder_config, spec.support_count(), o.gamma0, derive_seed(o.seed, 0));
  const auto result = fit(initial, train_set, train_inputs, val_set, val_inputs, spec, tc, [&](const LogRow& r) {
    if (!o.quiet) {
      out << "epoch " << r.epoch << " lr " << r.learning_rate << " loss " << r.mean_train_loss << " val "
          << r.val_accuracy << " sigma_eps^2 " << r.sigma_eps_sq << "\n";
    }
  });

  Manifest extra = tc.echo();
  extra.set("train.data", o.data);
  extra.set_uint("train.best_epoch", result.best_epoch);
  extra.set_double("train.best_val_accuracy", result.best_val_accuracy);
  extra.set_uint("train.ways", spec.ways);
  extra.set_uint("train.shots", spec.shots);
  extra.set_uint("train.queries_per_class", spec.queries_per_class);
  save_model(o.out, {result.best, transform, kind}, extra);
  write_text(fs::path(o.out) / "training_log.csv", training_log_csv(result.log));
  out << "trained " << to_string(kind) << " model: " << result.log.size() << " epochs, best epoch "
      << result.best_epoch << ", validation accuracy " << result.best_val_accuracy << "\n";
  return kExitOk;
}

// eval -----------------------------------------------------------------------

struct EvalOptions {
  std::string model_path;
  std::string data;
  std::string out;
  std::string support = "clean";
  std::string query = "clean";
  std::size_t episodes = 1000;
  std::size_t ways = 4;
  std::size_t shots = 2;
  std::size_t queries = 5;
  std::size_t eval_samples = 200;
  double corruption_prob = 1.0;
  std::size_t corruption_unit = 0;
  std::string compare;
  std::string compare_model_path;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool verify = false;
};

void setup_eval(CLI::App& app, EvalOptions& o) {
  app.add_option("--model-path", o.model_path, "Model directory")->required();
  app.add_option("--data", o.data, "Dataset directory")->required();
  app.add_option("--out", o.out, "Output directory for the report")->required();
  app.add_option("--support", o.support, "clean or corrupt support images")->capture_default_str();
  app.add_option("--query", o.query, "clean or corrupt query images")->capture_default_str();
  app.add_option("--episodes", o.episodes, "Test episodes")->capture_default_str();
  app.add_option("--ways", o.ways, "Classes per episode")->capture_default_str();
  app.add_option("--shots", o.shots, "Support instances per class")->capture_default_str();
  app.add_option("--queries", o.queries, "Query instances per class")->capture_default_str();
  app.add_option("--eval-samples", o.eval_samples, "Naive-sampler draws per query (SPE)")->capture_default_str();
  app.add_option("--corruption-prob", o.corruption_prob, "Per-unit occlusion probability in corrupt sets")
      ->capture_default_str();
  app.add_option("--corruption-unit", o.corruption_unit, "Occlusion unit in pixels; 0 = whole image")
      ->capture_default_str();
  app.add_option("--compare", o.compare, "Kind of a second model for a paired comparison (spe or pn)");
  app.add_option("--compare-model-path", o.compare_model_path, "Directory of the second model");
  add_seed_threads(app, o.seed, o.threads);
  app.add_flag("--verify", o.verify, "Check report invariants and fail if any is violated");
}

void verify_report(const EvalReport& r, std::size_t episodes) {
  if (r.per_episode_accuracy.size() != episodes) throw VerificationError("report has the wrong episode count");
  double total = 0.0;
  for (double a : r.per_episode_accuracy) {
    if (!(a >= 0.0 && a <= 1.0)) throw VerificationError("episode accuracy outside [0, 1]");
    total += a;
  }
  if (std::fabs(total / static_cast<double>(episodes) - r.mean_accuracy) > 1e-12) {
    throw VerificationError("mean accuracy is not the mean of the episode accuracies");
  }
  if (!(r.std_error >= 0.0) || !std::isfinite(r.std_error)) throw VerificationError("invalid standard error");
}

int run_eval(const EvalOptions& o, std::ostream& out) {
  EvalConfig config;
  config.episodes = o.episodes;
  config.spec = {o.ways, o.shots, o.queries};
  config.eval_samples = o.eval_samples;
  const auto support_mode = parse_occlusion_mode(o.support);
  const auto query_mode = parse_occlusion_mode(o.query);
  if (!o.compare.empty()) {
    parse_model_kind(o.compare);
    if (o.compare_model_path.empty()) throw ConfigError("--compare needs --compare-model-path");
  }

  ResolvedConfig cfg;
  cfg.add("model-path", o.model_path);
  cfg.add("data", o.data);
  cfg.add("out", o.out);
  cfg.add("support", o.support);
  cfg.add("query", o.query);
  cfg.add("episodes", std::uint64_t{o.episodes});
  cfg.add("ways", std::uint64_t{o.ways});
  cfg.add("shots", std::uint64_t{o.shots});
  cfg.add("queries", std::uint64_t{o.queries});
  cfg.add("eval-samples", std::uint64_t{o.eval_samples});
  cfg.add("corruption-prob", o.corruption_prob);
  cfg.add("corruption-unit", std::uint64_t{o.corruption_unit});
  cfg.add("compare", o.compare);
  cfg.add("compare-model-path", o.compare_model_path);
  cfg.add("seed", o.seed);
  cfg.add("threads", std::uint64_t{o.threads});
  cfg.add("verify", o.verify);

  const auto model = load_model(o.model_path);
  const auto dataset = load_dataset(o.data);
  const auto prepared = prepare_inputs(dataset, model.transform);
  const auto unit = resolve_unit(o.corruption_unit, dataset.shape);
  config.support_policy = {o.corruption_prob, unit, support_mode};
  config.query_policy = {o.corruption_prob, unit, query_mode};
  config.model_kind = model.kind;
  config.validate();
  fs::create_directories(o.out);
  cfg.write(fs::path(o.out) / "eval.ini");

  auto report = evaluate(model.encoder, dataset, prepared, config, o.seed, o.threads);
  report.echo.set("model_path", o.model_path);
  report.echo.set("regime", "support=" + o.support + ",query=" + o.query);
  if (o.verify) verify_report(report, o.episodes);
  const std::string regime = "support " + o.support + ", query " + o.query;

  if (o.compare.empty()) {
    write_text(fs::path(o.out) / "eval_report.txt", report.to_text());
    out << to_string(model.kind) << " accuracy (" << regime << "): " << describe(report) << "\n";
    return kExitOk;
  }

  const auto other = load_model(o.compare_model_path);
  if (to_string(other.kind) != o.compare) {
    throw ConfigError("--compare " + o.compare + " but " + o.compare_model_path + " holds a " +
                      to_string(other.kind) + " model");
  }
  const auto other_inputs = prepare_inputs(dataset, other.transform);
  auto other_config = config;
  other_config.model_kind = other.kind;
  auto other_report = evaluate(other.encoder, dataset, other_inputs, other_config, o.seed, o.threads);
  other_report.echo.set("model_path", o.compare_model_path);
  if (o.verify) verify_report(other_report, o.episodes);
  const auto paired = compare(report, other_report);
  if (o.verify) {
    if (paired.positives + paired.negatives + paired.ties != o.episodes) {
      throw VerificationError("paired counts do not cover every episode");
    }
    if (!(paired.p_value >= 0.0 && paired.p_value <= 1.0)) throw VerificationError("p-value outside [0, 1]");
  }
  write_text(fs::path(o.out) / "eval_report.txt", paired.to_text());
  out << to_string(model.kind) << " " << describe(report) << " vs " << to_string(other.kind) << " "
      << describe(other_report) << " (" << regime << "): " << paired.positives << " wins, " << paired.negatives
      << " losses, " << paired.ties << " ties, sign test p = " << paired.p_value << "\n";
  return kExitOk;
}

// sweep ----------------------------------------------------------------------

struct SweepOptions {
  std::string model_path;
  std::string out;
  std::string noise = "hue";
  std::string levels = "default";
  std::size_t samples_per_level = 50;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool verify = false;
};

void setup_sweep(CLI::App& app, SweepOptions& o) {
  app.add_option("--model-path", o.model_path, "Model directory (2-D, pixel input)")->required();
  app.add_option("--out", o.out, "Output directory for sweep.csv")->required();
  app.add_option("--noise", o.noise, "hue (noise std, degrees) or leg (leg fraction)")->capture_default_str();
  app.add_option("--levels", o.levels,
                 "Comma-separated levels; 'default' = 0,15,30,45,60 (hue) or 1,0.7,0.4,0.1 (leg)")
      ->capture_default_str();
  app.add_option("--samples-per-level", o.samples_per_level, "Renders per class center and level")
      ->capture_default_str();
  add_seed_threads(app, o.seed, o.threads);
  app.add_flag("--verify", o.verify, "Check the expected variance trend and fail if it is absent");
}

int run_sweep(const SweepOptions& o, std::ostream& out) {
  const auto kind = parse_sweep_noise(o.noise);
  std::string levels_text = o.levels;
  if (levels_text == "default") levels_text = kind == SweepNoise::kHue ? "0,15,30,45,60" : "1,0.7,0.4,0.1";
  const auto levels = parse_levels(levels_text);

  ResolvedConfig cfg;
  cfg.add("model-path", o.model_path);
  cfg.add("out", o.out);
  cfg.add("noise", o.noise);
  cfg.add("levels", o.levels);
  cfg.add("samples-per-level", std::uint64_t{o.samples_per_level});
  cfg.add("seed", o.seed);
  cfg.add("threads", std::uint64_t{o.threads});
  cfg.add("verify", o.verify);

  const auto model = load_model(o.model_path);
  fs::create_directories(o.out);
  cfg.write(fs::path(o.out) / "sweep.ini");
  const auto rows = uncertainty_sweep(model, SyntheticSpec{}, kind, levels, o.samples_per_level, o.seed);
  write_text(fs::path(o.out) / "sweep.csv", sweep_csv(rows, model.encoder.config.embed_dim));
  out << "wrote " << rows.size() << " " << o.noise << " sweep rows to " << (fs::path(o.out) / "sweep.csv").string()
      << "\n";
  if (o.verify) {
    const auto check = kind == SweepNoise::kHue ? check_hue_sweep(rows) : check_leg_sweep(rows);
    if (!check.ok) throw VerificationError(o.noise + " sweep: " + check.message);
    out << "verified: " << check.message << "\n";
  }
  return kExitOk;
}

// export-embeddings ----------------------------------------------------------

struct ExportOptions {
  std::string model_path;
  std::string data;
  std::string out;
};

void setup_export(CLI::App& app, ExportOptions& o) {
  app.add_option("--model-path", o.model_path, "Model directory")->required();
  app.add_option("--data", o.data, "Dataset directory")->required();
  app.add_option("--out", o.out, "Output directory for embeddings.csv")->required();
}

int run_export(const ExportOptions& o, std::ostream& out) {
  ResolvedConfig cfg;
  cfg.add("model-path", o.model_path);
  cfg.add("data", o.data);
  cfg.add("out", o.out);
  const auto model = load_model(o.model_path);
  const auto dataset = load_dataset(o.data);
  const auto prepared = prepare_inputs(dataset, model.transform);
  fs::create_directories(o.out);
  cfg.write(fs::path(o.out) / "export-embeddings.ini");
  write_text(fs::path(o.out) / "embeddings.csv", embeddings_csv(model.encoder, dataset, prepared));
  out << "wrote " << dataset.size() << " embeddings to " << (fs::path(o.out) / "embeddings.csv").string() << "\n";
  return kExitOk;
}

// dispatch -------------------------------------------------------------------

template <typename Options>
int run_command(const std::string& name, const std::string& description, const std::vector<std::string>& args,
                void (*setup)(CLI::App&, Options&), int (*run)(const Options&, std::ostream&), std::ostream& out,
                std::ostream& err) {
  CLI::App app(description, "spe " + name);
  app.set_config("--config", "", "Read options from a resolved config file");
  Options options;
  setup(app, options);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "spe " << name << ": " << e.what() << "\n";
    return kExitConfig;
  }
  return run(options, out);
}

const char* kUsage =
    "usage: spe <command> [options]\n"
    "commands:\n"
    "  gen-data            generate the synthetic shape dataset\n"
    "  train               train an SPE or PN encoder\n"
    "  eval                episodic evaluation, optionally paired against a second model\n"
    "  sweep               variance response to hue or leg-length noise\n"
    "  export-embeddings   write per-instance means and variances as CSV\n"
    "run 'spe <command> --help' for options\n";

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    (args.empty() ? err : out) << kUsage;
    return args.empty() ? kExitConfig : kExitOk;
  }
  const auto& command = args[0];
  const std::vector<std::string> rest(args.begin() + 1, args.end());
  if (command == "gen-data") {
    return run_command<GenDataOptions>(command, "Generate the synthetic dataset", rest, setup_gen_data,
                                       run_gen_data, out, err);
  }
  if (command == "train") {
    return run_command<TrainOptions>(command, "Train an encoder", rest, setup_train, run_train, out, err);
  }
  if (command == "eval") {
    return run_command<EvalOptions>(command, "Evaluate a model on test episodes", rest, setup_eval, run_eval, out,
                                    err);
  }
  if (command == "sweep") {
    return run_command<SweepOptions>(command, "Uncertainty sweep", rest, setup_sweep, run_sweep, out, err);
  }
  if (command == "export-embeddings") {
    return run_command<ExportOptions>(command, "Export embeddings", rest, setup_export, run_export, out, err);
  }
  err << "spe: unknown command '" << command << "'\n" << kUsage;
  return kExitConfig;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const VerificationError& e) {
    err << "verification failed: " << e.what() << "\n";
    return kExitVerify;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace spe
