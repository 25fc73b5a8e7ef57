#pragma once

// Four-class color/orientation dataset of rotated 'L' shapes.
//
// Each class is an isotropic Gaussian in (orientation, hue) space with
// centers on the grid {90, 180} x {90, 180} degrees and a 30 degree standard
// deviation. Class c has orientation center kCenters[c / 2] and hue center
// kCenters[c % 2]. A minority of instances receive per-pixel hue noise and
// shortened legs.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "spe/dataset.hpp"
#include "spe/manifest.hpp"
#include "spe/rng.hpp"

namespace spe {

inline constexpr std::size_t kSyntheticClasses = 4;

struct SyntheticSpec {
  std::size_t image_size = 64;
  std::array<double, 2> centers{90.0, 180.0};
  double class_std = 30.0;
  double noisy_fraction = 0.15;
  std::array<double, 2> hue_noise_std_range{18.0, 54.0};
  std::array<double, 2> leg_fraction_range{0.10, 0.98};
  double saturation = 1.0;
  double value = 1.0;
  // Shape geometry as fractions of the image side.
  double bar_width = 0.08;
  double long_leg = 0.60;
  double short_leg = 0.40;
  /// true: leg shortening hits the same instances as hue noise. false: an
  /// independently drawn subset of the same size.
  bool bundle_leg_noise = true;
  InputMode mode = InputMode::kPixels;

  void validate() const;
  Manifest echo() const;
  ImageShape image_shape() const;
};

struct Latent {
  double orientation = 0.0;  // degrees in [0, 360)
  double hue = 0.0;          // degrees in [0, 360)
};

/// (orientation, hue) center of a class.
Latent class_center(const SyntheticSpec& spec, std::size_t label);

/// Center plus N(0, class_std) per coordinate, reduced mod 360.
Latent sample_latent(const SyntheticSpec& spec, std::size_t label, Rng& rng);

/// min(|a - b|, 360 - |a - b|) after reduction mod 360.
double circular_distance(double a_deg, double b_deg);
double wrap_degrees(double deg);

struct RenderParams {
  double orientation = 0.0;
  double hue = 0.0;
  double leg_fraction = 1.0;
  std::optional<double> hue_noise_std;
};

/// H x W x 3 RGB in [0, 1] on a black background. rng is only drawn from
/// when hue noise is requested.
std::vector<float> render(const SyntheticSpec& spec, const RenderParams& params, Rng& rng);

/// True where a pixel center lies inside the shape.
std::vector<bool> shape_mask(const SyntheticSpec& spec, double orientation, double leg_fraction);

std::array<float, 3> hsv_to_rgb(double hue_deg, double saturation, double value);
/// Hue in degrees of an RGB triple; the triple must not be gray.
double rgb_to_hue(float r, float g, float b);

/// cos/sin encoding of (orientation, hue), used in feature mode.
std::array<float, 4> latent_features(const Latent& latent);

/// per_class_count instances of every class (labels interleaved 0,1,2,3,...);
/// round(noisy_fraction * total) of them carry hue noise, and as many carry
/// short legs (see bundle_leg_noise).
Dataset generate_dataset(const SyntheticSpec& spec, std::size_t per_class_count, std::uint64_t seed);

/// Posterior over the four classes given the true latent, equal priors.
std::array<double, kSyntheticClasses> bayes_classify(const Latent& latent, const SyntheticSpec& spec);

}  // namespace spe
