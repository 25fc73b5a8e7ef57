#include "spe/corruption.hpp"

#include <algorithm>
#include <random>

#include "spe/errors.hpp"

namespace spe {

std::string to_string(OcclusionMode mode) { return mode == OcclusionMode::kClean ? "clean" : "corrupt"; }

OcclusionMode parse_occlusion_mode(const std::string& text) {
  if (text == "clean") return OcclusionMode::kClean;
  if (text == "corrupt") return OcclusionMode::kCorrupt;
  throw ConfigError("unknown occlusion mode '" + text + "' (expected clean or corrupt)");
}

void OcclusionPolicy::validate() const {
  if (!(per_unit_probability >= 0.0 && per_unit_probability <= 1.0)) {
    throw ConfigError("occlusion probability must lie in [0, 1]");
  }
  if (unit_size == 0) throw ConfigError("occlusion unit size must be positive");
}

OcclusionPolicy OcclusionPolicy::always(std::size_t unit_size) {
  return {1.0, unit_size, OcclusionMode::kCorrupt};
}

Rectangle sample_rectangle(std::size_t unit_size, Rng& rng) {
  std::uniform_int_distribution<std::size_t> extent(0, unit_size);
  Rectangle r;
  r.width = extent(rng);
  r.height = extent(rng);
  r.left = std::uniform_int_distribution<std::size_t>(0, unit_size - r.width)(rng);
  r.top = std::uniform_int_distribution<std::size_t>(0, unit_size - r.height)(rng);
  return r;
}

void occlude(std::span<float> image, const ImageShape& shape, const OcclusionPolicy& policy, Rng& rng) {
  if (policy.mode == OcclusionMode::kClean) return;
  policy.validate();
  if (image.size() != shape.values()) throw DimensionError("occlude: image size does not match its shape");
  const auto unit = policy.unit_size;
  if (shape.height < unit || shape.width < unit) {
    throw DimensionError("occlude: image smaller than the occlusion unit (" + std::to_string(unit) + " px)");
  }
  std::bernoulli_distribution hit(policy.per_unit_probability);
  for (std::size_t ur = 0; ur + unit <= shape.height; ur += unit) {
    for (std::size_t uc = 0; uc + unit <= shape.width; uc += unit) {
      if (!hit(rng)) continue;
      const auto rect = sample_rectangle(unit, rng);
      for (std::size_t r = 0; r < rect.height; ++r) {
        const auto row = ur + rect.top + r;
        auto* px = image.data() + (row * shape.width + uc + rect.left) * shape.channels;
        std::fill(px, px + rect.width * shape.channels, 0.0f);
      }
    }
  }
}

}  // namespace spe
