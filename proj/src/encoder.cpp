#include "spe/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

#include "spe/errors.hpp"
#include "spe/rng.hpp"

namespace spe {

namespace {

constexpr std::uint64_t kModelFormatVersion = 1;

std::string widths_string(const std::vector<std::size_t>& widths) {
  std::vector<std::string> parts;
  for (auto w : widths) parts.push_back(std::to_string(w));
  return join(parts, ',');
}

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    try {
      out.push_back(std::stoull(part));
    } catch (const std::exception&) {
      throw IoError("invalid layer width '" + part + "'");
    }
  }
  return out;
}

}  // namespace

void EncoderConfig::validate() const {
  if (input_dim == 0) throw ConfigError("encoder input_dim must be positive");
  if (embed_dim == 0) throw ConfigError("encoder embed_dim must be positive");
  for (auto h : hidden_dims) {
    if (h == 0) throw ConfigError("encoder hidden widths must be positive");
  }
}

std::vector<std::size_t> EncoderConfig::layer_widths() const {
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), hidden_dims.begin(), hidden_dims.end());
  widths.push_back(2 * embed_dim);
  return widths;
}

std::vector<std::span<double>> EncoderModel::parameters() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers) {
    out.push_back(layer.weight.data());
    out.push_back(layer.bias.data());
  }
  out.emplace_back(&gamma, 1);
  return out;
}

std::size_t EncoderModel::parameter_count() const {
  std::size_t n = 1;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

bool EncoderModel::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weight.all_finite() || !layer.bias.all_finite()) return false;
  }
  return std::isfinite(gamma);
}

double initial_gamma(std::size_t episode_support_count, double gamma0, std::size_t embed_dim) {
  return static_cast<double>(episode_support_count) * std::pow(gamma0, 2.0 / static_cast<double>(embed_dim));
}

EncoderModel init_encoder(const EncoderConfig& config, std::size_t episode_support_count, double gamma0,
                          std::uint64_t seed) {
  config.validate();
  if (!(gamma0 > 0.0)) throw ConfigError("gamma0 must be positive");
  if (episode_support_count == 0) throw ConfigError("episode support count must be positive");
  EncoderModel model;
  model.config = config;
  model.seed = seed;
  model.gamma = initial_gamma(episode_support_count, gamma0, config.embed_dim);
  Rng rng(seed);
  const auto widths = config.layer_widths();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = widths[l];
    const auto fan_out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{Tensor::zeros(fan_in, fan_out), Tensor::zeros(1, fan_out)};
    for (double& w : layer.weight.data()) w = dist(rng);
    for (double& b : layer.bias.data()) b = dist(rng);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

EncoderModel zero_encoder(const EncoderConfig& config) {
  config.validate();
  EncoderModel model;
  model.config = config;
  const auto widths = config.layer_widths();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    model.layers.push_back({Tensor::zeros(widths[l], widths[l + 1]), Tensor::zeros(1, widths[l + 1])});
  }
  return model;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigma_epsilon_sq(const EncoderModel& model) { return softplus(model.gamma); }

DiagonalGaussian encode(const EncoderModel& model, std::span<const double> x) {
  if (x.size() != model.config.input_dim) {
    throw DimensionError("encode: input has " + std::to_string(x.size()) + " values, encoder expects " +
                         std::to_string(model.config.input_dim));
  }
  std::vector<double> act(x.begin(), x.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const auto fan_in = layer.weight.rows();
    const auto fan_out = layer.weight.cols();
    next.assign(layer.bias.data().begin(), layer.bias.data().end());
    for (std::size_t i = 0; i < fan_in; ++i) {
      const double a = act[i];
      if (a == 0.0) continue;
      const double* wrow = layer.weight.data().data() + i * fan_out;
      for (std::size_t j = 0; j < fan_out; ++j) next[j] += a * wrow[j];
    }
    if (l + 1 < model.layers.size()) {
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    }
    act.swap(next);
  }
  const auto d = model.config.embed_dim;
  std::vector<double> mean(act.begin(), act.begin() + static_cast<std::ptrdiff_t>(d));
  std::vector<double> variance(d);
  for (std::size_t i = 0; i < d; ++i) variance[i] = softplus(act[d + i]) + kVarianceFloor;
  for (double v : act) {
    if (!std::isfinite(v)) throw NumericalError("encode: non-finite activation");
  }
  return DiagonalGaussian(std::move(mean), std::move(variance));
}

EncoderVars bind_parameters(Tape& tape, const EncoderModel& model) {
  EncoderVars vars;
  for (const auto& layer : model.layers) vars.layers.emplace_back(tape.leaf(layer.weight), tape.leaf(layer.bias));
  vars.gamma = tape.leaf(Tensor::scalar(model.gamma));
  return vars;
}

EmbeddingVars encode_batch(const EncoderVars& vars, const Var& inputs) {
  Var act = inputs;
  for (std::size_t l = 0; l < vars.layers.size(); ++l) {
    act = matmul(act, vars.layers[l].first) + vars.layers[l].second;
    if (l + 1 < vars.layers.size()) act = relu(act);
  }
  const auto d = act.cols() / 2;
  Var floor = act.tape()->constant(Tensor::scalar(kVarianceFloor));
  return {slice(act, 1, 0, d), softplus(slice(act, 1, d, 2 * d)) + floor};
}

Var sigma_epsilon_sq(const EncoderVars& vars) { return softplus(vars.gamma); }

std::vector<Tensor> collect_gradients(const Gradients& grads, const EncoderVars& vars) {
  std::vector<Tensor> out;
  for (const auto& [w, b] : vars.layers) {
    out.push_back(grads.of(w));
    out.push_back(grads.of(b));
  }
  out.push_back(grads.of(vars.gamma));
  return out;
}

void save_encoder(const std::filesystem::path& dir, const EncoderModel& model, const Manifest& extra) {
  std::filesystem::create_directories(dir);
  Manifest m;
  m.set_uint("format_version", kModelFormatVersion);
  m.set_uint("input_dim", model.config.input_dim);
  m.set("hidden_dims", widths_string(model.config.hidden_dims));
  m.set_uint("embed_dim", model.config.embed_dim);
  m.set("activation", "relu");
  m.set_double("gamma", model.gamma);
  m.set_uint("seed", model.seed);
  m.set_uint("parameter_count", model.parameter_count() - 1);
  for (const auto& [k, v] : extra.entries()) m.set(k, v);
  std::vector<float> blob;
  blob.reserve(model.parameter_count() - 1);
  for (const auto& layer : model.layers) {
    for (double w : layer.weight.data()) blob.push_back(static_cast<float>(w));
    for (double b : layer.bias.data()) blob.push_back(static_cast<float>(b));
  }
  m.write(dir / "model.manifest");
  write_f32_blob(dir / "model.params.f32", blob);
}

LoadedEncoder load_encoder(const std::filesystem::path& dir) {
  LoadedEncoder out;
  out.manifest = Manifest::read(dir / "model.manifest");
  const auto& m = out.manifest;
  if (m.get_uint("format_version") != kModelFormatVersion) {
    throw IoError("unsupported model format version " + m.get("format_version"));
  }
  EncoderConfig config;
  config.input_dim = m.get_uint("input_dim");
  config.hidden_dims = parse_widths(m.get("hidden_dims"));
  config.embed_dim = m.get_uint("embed_dim");
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("model manifest: ") + e.what());
  }
  auto& model = out.model;
  model = zero_encoder(config);
  model.gamma = m.get_double("gamma");
  model.seed = m.get_uint("seed");
  const auto count = model.parameter_count() - 1;
  if (m.get_uint("parameter_count") != count) throw IoError("model manifest parameter_count disagrees with config");
  const auto blob = read_f32_blob(dir / "model.params.f32", count);
  std::size_t pos = 0;
  for (auto& layer : model.layers) {
    for (double& w : layer.weight.data()) w = blob[pos++];
    for (double& b : layer.bias.data()) b = blob[pos++];
  }
  if (!model.all_finite()) throw IoError("model parameters are not finite");
  return out;
}

}  // namespace spe
