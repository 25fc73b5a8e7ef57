#pragma once

// Labeled image datasets and their on-disk format.
//
// A dataset directory holds
//   manifest.txt    key = value metadata (version, count, shape, classes,
//                   generator echo, seed, mode)
//   pixels.f32      count * height * width * channels floats, instance-major,
//                   row-major, channels interleaved
//   labels.u16      count class indices
//   latents.f32     count (orientation, hue) pairs in degrees
//   noise.f32       count (hue_noise_std, leg_fraction) pairs; std 0 = none
// All blobs are little-endian; readers check their sizes against the manifest.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spe/manifest.hpp"

namespace spe {

enum class InputMode { kPixels, kFeatures };

std::string to_string(InputMode mode);
InputMode parse_input_mode(const std::string& text);

struct ImageShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t values() const { return height * width * channels; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

struct NoiseFlags {
  float hue_noise_std = 0.0f;  // 0 when no hue noise was applied
  float leg_fraction = 1.0f;
};

struct Dataset {
  InputMode mode = InputMode::kPixels;
  ImageShape shape;
  std::vector<std::string> class_names;
  std::uint64_t seed = 0;
  /// Echo of the generator settings, stored verbatim in the manifest.
  Manifest generator;

  std::vector<float> pixels;
  std::vector<std::uint16_t> labels;
  std::vector<std::array<float, 2>> latents;
  std::vector<NoiseFlags> noise;

  std::size_t size() const { return labels.size(); }
  std::size_t class_count() const { return class_names.size(); }
  std::span<const float> image(std::size_t i) const;
  std::span<float> image(std::size_t i);

  /// Copies the listed instances, preserving metadata.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Throws DimensionError when blob sizes or labels are inconsistent.
  void validate() const;
};

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

/// Per-class split by instance: round(train_fraction * n_c) of each class
/// goes to the first result, the rest to the second.
std::pair<Dataset, Dataset> split_stratified(const Dataset& dataset, double train_fraction, std::uint64_t seed);

/// Maps stored images to encoder inputs: pixel images are average-pooled by
/// `pool` in both spatial directions; feature vectors pass through.
struct InputTransform {
  InputMode mode = InputMode::kPixels;
  ImageShape image;
  std::size_t pool = 1;

  std::size_t input_dim() const;
  void validate() const;
  std::vector<double> apply(std::span<const float> image_values) const;

  void write(Manifest& m) const;
  static InputTransform read(const Manifest& m);
};

}  // namespace spe
