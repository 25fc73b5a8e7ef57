#include "spe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spe/errors.hpp"
#include "spe/rng.hpp"

namespace spe {

namespace {

constexpr std::uint64_t kDatasetFormatVersion = 1;

}  // namespace

std::string to_string(InputMode mode) { return mode == InputMode::kPixels ? "pixels" : "features"; }

InputMode parse_input_mode(const std::string& text) {
  if (text == "pixels") return InputMode::kPixels;
  if (text == "features") return InputMode::kFeatures;
  throw ConfigError("unknown input mode '" + text + "'");
}

std::span<const float> Dataset::image(std::size_t i) const {
  return std::span<const float>(pixels).subspan(i * shape.values(), shape.values());
}

std::span<float> Dataset::image(std::size_t i) {
  return std::span<float>(pixels).subspan(i * shape.values(), shape.values());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.mode = mode;
  out.shape = shape;
  out.class_names = class_names;
  out.seed = seed;
  out.generator = generator;
  out.pixels.reserve(indices.size() * shape.values());
  for (auto i : indices) {
    if (i >= size()) throw DimensionError("dataset subset index out of range");
    const auto img = image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    out.labels.push_back(labels[i]);
    out.latents.push_back(latents[i]);
    out.noise.push_back(noise[i]);
  }
  return out;
}

void Dataset::validate() const {
  const auto n = labels.size();
  if (shape.values() == 0) throw DimensionError("dataset has an empty image shape");
  if (pixels.size() != n * shape.values()) throw DimensionError("dataset pixel blob does not match count and shape");
  if (latents.size() != n || noise.size() != n) throw DimensionError("dataset per-instance blobs differ in length");
  for (auto label : labels) {
    if (label >= class_names.size()) throw DimensionError("dataset label exceeds class count");
  }
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  dataset.validate();
  std::filesystem::create_directories(dir);
  Manifest m;
  m.set_uint("format_version", kDatasetFormatVersion);
  m.set("mode", to_string(dataset.mode));
  m.set_uint("count", dataset.size());
  m.set_uint("height", dataset.shape.height);
  m.set_uint("width", dataset.shape.width);
  m.set_uint("channels", dataset.shape.channels);
  m.set("class_names", join(dataset.class_names, ','));
  m.set_uint("seed", dataset.seed);
  for (const auto& [k, v] : dataset.generator.entries()) m.set("generator." + k, v);
  m.write(dir / "manifest.txt");

  write_f32_blob(dir / "pixels.f32", dataset.pixels);
  write_u16_blob(dir / "labels.u16", dataset.labels);
  std::vector<float> latents;
  std::vector<float> noise;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    latents.push_back(dataset.latents[i][0]);
    latents.push_back(dataset.latents[i][1]);
    noise.push_back(dataset.noise[i].hue_noise_std);
    noise.push_back(dataset.noise[i].leg_fraction);
  }
  write_f32_blob(dir / "latents.f32", latents);
  write_f32_blob(dir / "noise.f32", noise);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto m = Manifest::read(dir / "manifest.txt");
  if (m.get_uint("format_version") != kDatasetFormatVersion) {
    throw IoError("unsupported dataset format version " + m.get("format_version"));
  }
  Dataset ds;
  try {
    ds.mode = parse_input_mode(m.get("mode"));
  } catch (const ConfigError& e) {
    throw IoError(std::string("dataset manifest: ") + e.what());
  }
  const auto count = m.get_uint("count");
  ds.shape = {m.get_uint("height"), m.get_uint("width"), m.get_uint("channels")};
  ds.class_names = split(m.get("class_names"), ',');
  ds.seed = m.get_uint("seed");
  for (const auto& [k, v] : m.entries()) {
    if (k.rfind("generator.", 0) == 0) ds.generator.set(k.substr(10), v);
  }
  ds.pixels = read_f32_blob(dir / "pixels.f32", count * ds.shape.values());
  ds.labels = read_u16_blob(dir / "labels.u16", count);
  const auto latents = read_f32_blob(dir / "latents.f32", 2 * count);
  const auto noise = read_f32_blob(dir / "noise.f32", 2 * count);
  for (std::size_t i = 0; i < count; ++i) {
    ds.latents.push_back({latents[2 * i], latents[2 * i + 1]});
    ds.noise.push_back({noise[2 * i], noise[2 * i + 1]});
  }
  try {
    ds.validate();
  } catch (const DimensionError& e) {
    throw IoError(std::string("dataset ") + dir.string() + ": " + e.what());
  }
  return ds;
}

std::pair<Dataset, Dataset> split_stratified(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  for (std::size_t c = 0; c < dataset.class_count(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.labels[i] == c) members.push_back(i);
    }
    Rng rng = derive_rng(seed, c);
    std::shuffle(members.begin(), members.end(), rng);
    const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    first.insert(first.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(cut));
    second.insert(second.end(), members.begin() + static_cast<std::ptrdiff_t>(cut), members.end());
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {dataset.subset(first), dataset.subset(second)};
}

std::size_t InputTransform::input_dim() const {
  if (mode == InputMode::kFeatures) return image.values();
  return (image.height / pool) * (image.width / pool) * image.channels;
}

void InputTransform::validate() const {
  if (image.values() == 0) throw ConfigError("input transform has an empty image shape");
  if (pool == 0) throw ConfigError("pool factor must be positive");
  if (mode == InputMode::kPixels && (image.height % pool != 0 || image.width % pool != 0)) {
    throw ConfigError("pool factor " + std::to_string(pool) + " does not divide the image size");
  }
}

std::vector<double> InputTransform::apply(std::span<const float> values) const {
  if (values.size() != image.values()) throw DimensionError("input transform: image size mismatch");
  if (mode == InputMode::kFeatures || pool == 1) return std::vector<double>(values.begin(), values.end());
  const auto oh = image.height / pool;
  const auto ow = image.width / pool;
  const auto ch = image.channels;
  std::vector<double> out(oh * ow * ch, 0.0);
  for (std::size_t r = 0; r < image.height; ++r) {
    const auto orow = r / pool;
    for (std::size_t c = 0; c < image.width; ++c) {
      const auto base = (orow * ow + c / pool) * ch;
      const auto src = (r * image.width + c) * ch;
      for (std::size_t k = 0; k < ch; ++k) out[base + k] += values[src + k];
    }
  }
  const double scale = 1.0 / static_cast<double>(pool * pool);
  for (double& v : out) v *= scale;
  return out;
}

void InputTransform::write(Manifest& m) const {
  m.set("input.mode", to_string(mode));
  m.set_uint("input.height", image.height);
  m.set_uint("input.width", image.width);
  m.set_uint("input.channels", image.channels);
  m.set_uint("input.pool", pool);
}

InputTransform InputTransform::read(const Manifest& m) {
  InputTransform t;
  try {
    t.mode = parse_input_mode(m.get("input.mode"));
  } catch (const ConfigError& e) {
    throw IoError(e.what());
  }
  t.image = {m.get_uint("input.height"), m.get_uint("input.width"), m.get_uint("input.channels")};
  t.pool = m.get_uint("input.pool");
  return t;
}

}  // namespace spe
