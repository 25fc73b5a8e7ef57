#pragma once

// Rectangle occlusion. The image is tiled into unit_size x unit_size units
// (partial units at the right/bottom edge are left alone); each unit is
// independently occluded with per_unit_probability. An occlusion draws
// integer extents Lx, Ly uniformly from {0..unit}, then a top-left corner
// uniformly from {0..unit-L} on each axis, and zeroes that rectangle. A zero
// extent leaves the unit untouched.

#include <cstddef>
#include <span>
#include <string>

#include "spe/dataset.hpp"
#include "spe/rng.hpp"

namespace spe {

enum class OcclusionMode { kClean, kCorrupt };

std::string to_string(OcclusionMode mode);
OcclusionMode parse_occlusion_mode(const std::string& text);

struct OcclusionPolicy {
  double per_unit_probability = 0.2;
  std::size_t unit_size = 28;
  OcclusionMode mode = OcclusionMode::kClean;

  void validate() const;
  /// Corrupt mode with probability 1: every unit is hit.
  static OcclusionPolicy always(std::size_t unit_size);
};

struct Rectangle {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  bool empty() const { return height == 0 || width == 0; }
};

/// One draw within a unit of the given size, in unit-local coordinates.
Rectangle sample_rectangle(std::size_t unit_size, Rng& rng);

/// Occludes image in place. Clean mode draws nothing from rng.
void occlude(std::span<float> image, const ImageShape& shape, const OcclusionPolicy& policy, Rng& rng);

}  // namespace spe
