#include "spe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "spe/errors.hpp"
#include "spe/gaussian.hpp"

namespace spe {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr std::uint64_t kNoisySubsetStream = 0xfeedULL;

std::vector<bool> pick_subset(std::size_t total, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> chosen(total, false);
  for (std::size_t k = 0; k < count; ++k) chosen[order[k]] = true;
  return chosen;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (image_size < 8) throw ConfigError("image size must be at least 8 pixels");
  if (class_std < 0.0) throw ConfigError("class std must be non-negative");
  if (noisy_fraction < 0.0 || noisy_fraction > 1.0) throw ConfigError("noisy fraction must lie in [0, 1]");
  if (hue_noise_std_range[0] < 0.0 || hue_noise_std_range[1] < hue_noise_std_range[0]) {
    throw ConfigError("invalid hue noise range");
  }
  if (!(leg_fraction_range[0] > 0.0) || leg_fraction_range[1] > 1.0 || leg_fraction_range[1] < leg_fraction_range[0]) {
    throw ConfigError("leg fraction range must lie in (0, 1]");
  }
}

Manifest SyntheticSpec::echo() const {
  Manifest m;
  m.set_uint("image_size", image_size);
  m.set("centers", format_double(centers[0]) + "," + format_double(centers[1]));
  m.set_double("class_std", class_std);
  m.set_double("noisy_fraction", noisy_fraction);
  m.set("hue_noise_std_range", format_double(hue_noise_std_range[0]) + "," + format_double(hue_noise_std_range[1]));
  m.set("leg_fraction_range", format_double(leg_fraction_range[0]) + "," + format_double(leg_fraction_range[1]));
  m.set_double("saturation", saturation);
  m.set_double("value", value);
  m.set_double("bar_width", bar_width);
  m.set_double("long_leg", long_leg);
  m.set_double("short_leg", short_leg);
  m.set("bundle_leg_noise", bundle_leg_noise ? "true" : "false");
  return m;
}

ImageShape SyntheticSpec::image_shape() const {
  if (mode == InputMode::kFeatures) return {1, 1, 4};
  return {image_size, image_size, 3};
}

Latent class_center(const SyntheticSpec& spec, std::size_t label) {
  if (label >= kSyntheticClasses) throw DimensionError("synthetic class index must be 0..3");
  return {spec.centers[label / 2], spec.centers[label % 2]};
}

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  return w >= 360.0 ? 0.0 : w;
}

double circular_distance(double a_deg, double b_deg) {
  const double diff = std::fabs(wrap_degrees(a_deg) - wrap_degrees(b_deg));
  return std::min(diff, 360.0 - diff);
}

Latent sample_latent(const SyntheticSpec& spec, std::size_t label, Rng& rng) {
  const auto center = class_center(spec, label);
  if (spec.class_std == 0.0) return center;
  std::normal_distribution<double> normal(0.0, spec.class_std);
  const double orientation = center.orientation + normal(rng);
  const double hue = center.hue + normal(rng);
  return {wrap_degrees(orientation), wrap_degrees(hue)};
}

std::vector<bool> shape_mask(const SyntheticSpec& spec, double orientation, double leg_fraction) {
  const auto side = spec.image_size;
  const double s = static_cast<double>(side);
  const double width = spec.bar_width * s;
  const double long_leg = spec.long_leg * s * leg_fraction;
  const double short_leg = spec.short_leg * s * leg_fraction;
  // Corner of the full-size L placed so its bounding box is centered.
  const double corner_x = -0.5 * spec.short_leg * s;
  const double corner_y = -0.5 * spec.long_leg * s;
  const double theta = wrap_degrees(orientation) * kDegToRad;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  std::vector<bool> mask(side * side, false);
  for (std::size_t r = 0; r < side; ++r) {
    const double y = 0.5 * s - (static_cast<double>(r) + 0.5);
    for (std::size_t c = 0; c < side; ++c) {
      const double x = static_cast<double>(c) + 0.5 - 0.5 * s;
      // Rotate the pixel center by -theta into the shape frame.
      const double u = cos_t * x + sin_t * y - corner_x;
      const double v = -sin_t * x + cos_t * y - corner_y;
      const bool upright = u >= 0.0 && u <= width && v >= 0.0 && v <= long_leg;
      const bool foot = v >= 0.0 && v <= width && u >= 0.0 && u <= short_leg;
      mask[r * side + c] = upright || foot;
    }
  }
  return mask;
}

std::array<float, 3> hsv_to_rgb(double hue_deg, double saturation, double value) {
  const double h = wrap_degrees(hue_deg) / 60.0;
  const double chroma = value * saturation;
  const double x = chroma * (1.0 - std::fabs(std::fmod(h, 2.0) - 1.0));
  const double m = value - chroma;
  double r = 0.0, g = 0.0, b = 0.0;
  switch (static_cast<int>(h)) {
    case 0: r = chroma; g = x; break;
    case 1: r = x; g = chroma; break;
    case 2: g = chroma; b = x; break;
    case 3: g = x; b = chroma; break;
    case 4: r = x; b = chroma; break;
    default: r = chroma; b = x; break;
  }
  return {static_cast<float>(r + m), static_cast<float>(g + m), static_cast<float>(b + m)};
}

double rgb_to_hue(float r, float g, float b) {
  const float hi = std::max({r, g, b});
  const float lo = std::min({r, g, b});
  const double delta = hi - lo;
  if (delta <= 0.0) throw DimensionError("rgb_to_hue: gray pixel has no hue");
  double h = 0.0;
  if (hi == r) {
    h = std::fmod((g - b) / delta, 6.0);
  } else if (hi == g) {
    h = (b - r) / delta + 2.0;
  } else {
    h = (r - g) / delta + 4.0;
  }
  return wrap_degrees(60.0 * h);
}

std::vector<float> render(const SyntheticSpec& spec, const RenderParams& params, Rng& rng) {
  if (!std::isfinite(params.orientation) || !std::isfinite(params.hue)) {
    throw DimensionError("render: angles must be finite");
  }
  if (!(params.leg_fraction > 0.0 && params.leg_fraction <= 1.0)) {
    throw DimensionError("render: leg fraction must lie in (0, 1]");
  }
  const auto side = spec.image_size;
  const auto mask = shape_mask(spec, params.orientation, params.leg_fraction);
  std::vector<float> pixels(side * side * 3, 0.0f);
  const auto clean = hsv_to_rgb(params.hue, spec.saturation, spec.value);
  std::normal_distribution<double> hue_noise(0.0, params.hue_noise_std.value_or(0.0));
  const bool noisy = params.hue_noise_std.has_value() && *params.hue_noise_std > 0.0;
  for (std::size_t i = 0; i < side * side; ++i) {
    if (!mask[i]) continue;
    const auto rgb = noisy ? hsv_to_rgb(params.hue + hue_noise(rng), spec.saturation, spec.value) : clean;
    std::copy(rgb.begin(), rgb.end(), pixels.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return pixels;
}

std::array<float, 4> latent_features(const Latent& latent) {
  const double o = latent.orientation * kDegToRad;
  const double h = latent.hue * kDegToRad;
  return {static_cast<float>(std::cos(o)), static_cast<float>(std::sin(o)), static_cast<float>(std::cos(h)),
          static_cast<float>(std::sin(h))};
}

Dataset generate_dataset(const SyntheticSpec& spec, std::size_t per_class_count, std::uint64_t seed) {
  spec.validate();
  if (per_class_count == 0) throw ConfigError("per-class count must be at least 1");
  const auto total = per_class_count * kSyntheticClasses;
  Dataset ds;
  ds.mode = spec.mode;
  ds.shape = spec.image_shape();
  ds.class_names = {"o90_h90", "o90_h180", "o180_h90", "o180_h180"};
  ds.seed = seed;
  ds.generator = spec.echo();
  ds.pixels.resize(total * ds.shape.values());
  ds.labels.resize(total);
  ds.latents.resize(total);
  ds.noise.resize(total);

  const auto noisy_count = static_cast<std::size_t>(std::llround(spec.noisy_fraction * static_cast<double>(total)));
  const auto hue_noisy = pick_subset(total, noisy_count, derive_seed(seed, kNoisySubsetStream));
  const auto leg_noisy =
      spec.bundle_leg_noise ? hue_noisy : pick_subset(total, noisy_count, derive_seed(seed, kNoisySubsetStream + 1));

  for (std::size_t i = 0; i < total; ++i) {
    Rng rng = derive_rng(seed, i);
    const auto label = i % kSyntheticClasses;
    const auto latent = sample_latent(spec, label, rng);
    RenderParams params{latent.orientation, latent.hue, 1.0, std::nullopt};
    if (hue_noisy[i]) {
      std::uniform_real_distribution<double> hue_std(spec.hue_noise_std_range[0], spec.hue_noise_std_range[1]);
      params.hue_noise_std = hue_std(rng);
    }
    if (leg_noisy[i]) {
      std::uniform_real_distribution<double> legs(spec.leg_fraction_range[0], spec.leg_fraction_range[1]);
      params.leg_fraction = legs(rng);
    }
    ds.labels[i] = static_cast<std::uint16_t>(label);
    ds.latents[i] = {static_cast<float>(latent.orientation), static_cast<float>(latent.hue)};
    ds.noise[i] = {static_cast<float>(params.hue_noise_std.value_or(0.0)), static_cast<float>(params.leg_fraction)};
    auto dst = ds.image(i);
    if (spec.mode == InputMode::kFeatures) {
      const auto f = latent_features(latent);
      std::copy(f.begin(), f.end(), dst.begin());
    } else {
      const auto img = render(spec, params, rng);
      std::copy(img.begin(), img.end(), dst.begin());
    }
  }
  return ds;
}

std::array<double, kSyntheticClasses> bayes_classify(const Latent& latent, const SyntheticSpec& spec) {
  std::array<double, kSyntheticClasses> log_lik{};
  const double var = spec.class_std * spec.class_std;
  for (std::size_t c = 0; c < kSyntheticClasses; ++c) {
    const auto center = class_center(spec, c);
    const double d_o = circular_distance(latent.orientation, center.orientation);
    const double d_h = circular_distance(latent.hue, center.hue);
    log_lik[c] = -0.5 * (d_o * d_o + d_h * d_h) / var;
  }
  const double norm = log_sum_exp(log_lik);
  std::array<double, kSyntheticClasses> out{};
  for (std::size_t c = 0; c < kSyntheticClasses; ++c) out[c] = std::exp(log_lik[c] - norm);
  return out;
}

}  // namespace spe
