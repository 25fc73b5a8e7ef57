#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "spe/errors.hpp"
#include "spe/synthetic.hpp"
#include "temp_dir.hpp"

namespace spe {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Circular mean in degrees of in-shape pixel hues.
double mean_shape_hue(const std::vector<float>& pixels, std::size_t* count = nullptr) {
  double s = 0.0, c = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i + 2 < pixels.size(); i += 3) {
    const float r = pixels[i], g = pixels[i + 1], b = pixels[i + 2];
    if (std::max({r, g, b}) == 0.0f) continue;
    const double h = rgb_to_hue(r, g, b) * kDegToRad;
    s += std::sin(h);
    c += std::cos(h);
    ++n;
  }
  if (count) *count = n;
  return wrap_degrees(std::atan2(s, c) / kDegToRad);
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(CircularDistance, WrapsAround) {
  EXPECT_DOUBLE_EQ(circular_distance(10.0, 350.0), 20.0);
  EXPECT_DOUBLE_EQ(circular_distance(-90.0, 90.0), 180.0);
  EXPECT_DOUBLE_EQ(circular_distance(725.0, 5.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_degrees(-30.0), 330.0);
}

TEST(SampleLatent, ZeroStdGivesCenter) {
  SyntheticSpec spec;
  spec.class_std = 0.0;
  Rng rng(1);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto l = sample_latent(spec, c, rng);
    const auto center = class_center(spec, c);
    EXPECT_EQ(l.orientation, center.orientation);
    EXPECT_EQ(l.hue, center.hue);
  }
  EXPECT_THROW(class_center(spec, 4), DimensionError);
}

TEST(SampleLatent, CenterGrid) {
  const SyntheticSpec spec;
  const auto a = class_center(spec, 0), d = class_center(spec, 3);
  EXPECT_DOUBLE_EQ(d.orientation - a.orientation, 90.0);
  EXPECT_DOUBLE_EQ(d.hue - a.hue, 90.0);
}

TEST(SampleLatent, EmpiricalStdIsThirtyDegrees) {
  const SyntheticSpec spec;
  Rng rng(2);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto center = class_center(spec, c);
    double so = 0.0, sh = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const auto l = sample_latent(spec, c, rng);
      // Signed offsets from the center, unwrapped.
      const double dO = std::remainder(l.orientation - center.orientation, 360.0);
      const double dH = std::remainder(l.hue - center.hue, 360.0);
      so += dO * dO;
      sh += dH * dH;
    }
    EXPECT_NEAR(std::sqrt(so / n), 30.0, 1.0);
    EXPECT_NEAR(std::sqrt(sh / n), 30.0, 1.0);
  }
}

TEST(Render, CleanIsDeterministicAndCircular) {
  const SyntheticSpec spec;
  Rng rng(3);
  const RenderParams p{37.0, 120.0, 1.0, std::nullopt};
  const auto a = render(spec, p, rng);
  const auto b = render(spec, p, rng);
  EXPECT_EQ(a, b);
  const auto c = render(spec, {37.0 + 360.0, 120.0, 1.0, std::nullopt}, rng);
  EXPECT_EQ(a, c);
  EXPECT_EQ(a.size(), 64u * 64u * 3u);
  for (float v : a) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Render, OrientationChangesTheImage) {
  const SyntheticSpec spec;
  Rng rng(4);
  EXPECT_NE(render(spec, {90.0, 120.0, 1.0, std::nullopt}, rng), render(spec, {180.0, 120.0, 1.0, std::nullopt}, rng));
}

TEST(Render, ShortLegsCoverFewerPixels) {
  const SyntheticSpec spec;
  auto count = [](const std::vector<bool>& m) { return std::count(m.begin(), m.end(), true); };
  const auto full = count(shape_mask(spec, 45.0, 1.0));
  const auto tenth = count(shape_mask(spec, 45.0, 0.1));
  EXPECT_GT(full, 200);
  EXPECT_LT(tenth, full / 4);
  EXPECT_GT(tenth, 0);
}

TEST(Render, CleanHueIsRecovered) {
  const SyntheticSpec spec;
  Rng rng(5);
  for (double hue : {10.0, 90.0, 135.0, 180.0, 300.0}) {
    const auto img = render(spec, {60.0, hue, 1.0, std::nullopt}, rng);
    EXPECT_LT(circular_distance(mean_shape_hue(img), hue), 3.0);
  }
}

TEST(Render, NoisyHueMeanWithinTwoDegrees) {
  SyntheticSpec spec;
  spec.image_size = 128;  // enough in-shape pixels for a single image
  Rng rng(6);
  std::size_t n = 0;
  const auto img = render(spec, {100.0, 150.0, 1.0, 18.0}, rng);
  const double h = mean_shape_hue(img, &n);
  EXPECT_GE(n, 1000u);
  EXPECT_LT(circular_distance(h, 150.0), 2.0);
}

TEST(Render, Errors) {
  const SyntheticSpec spec;
  Rng rng(7);
  EXPECT_THROW(render(spec, {0.0, 0.0, 0.0, std::nullopt}, rng), DimensionError);
  EXPECT_THROW(render(spec, {0.0, 0.0, 1.5, std::nullopt}, rng), DimensionError);
  EXPECT_THROW(render(spec, {std::nan(""), 0.0, 1.0, std::nullopt}, rng), DimensionError);
}

TEST(HsvRoundTrip, HueSurvives) {
  for (double h = 0.5; h < 360.0; h += 7.3) {
    const auto rgb = hsv_to_rgb(h, 1.0, 1.0);
    EXPECT_NEAR(circular_distance(rgb_to_hue(rgb[0], rgb[1], rgb[2]), h), 0.0, 1e-4);
  }
  EXPECT_THROW(rgb_to_hue(0.5f, 0.5f, 0.5f), DimensionError);
}

TEST(GenerateDataset, CountsAndBalance) {
  const SyntheticSpec spec;
  const auto ds = generate_dataset(spec, 100, 11);
  ASSERT_EQ(ds.size(), 400u);
  std::array<int, 4> per_class{};
  int noisy = 0, short_legs = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ++per_class[ds.labels[i]];
    const auto& f = ds.noise[i];
    if (f.hue_noise_std > 0.0f) {
      ++noisy;
      EXPECT_GE(f.hue_noise_std, 18.0f);
      EXPECT_LE(f.hue_noise_std, 54.0f);
      EXPECT_GE(f.leg_fraction, 0.10f);
      EXPECT_LE(f.leg_fraction, 0.98f);
    } else {
      EXPECT_EQ(f.leg_fraction, 1.0f);
    }
    if (f.leg_fraction < 1.0f) ++short_legs;
  }
  for (int c : per_class) EXPECT_EQ(c, 100);
  EXPECT_EQ(noisy, 60);
  EXPECT_EQ(short_legs, 60);
}

TEST(GenerateDataset, IndependentLegNoise) {
  SyntheticSpec spec;
  spec.bundle_leg_noise = false;
  spec.mode = InputMode::kFeatures;
  const auto ds = generate_dataset(spec, 250, 12);
  int noisy = 0, short_legs = 0, both = 0;
  for (const auto& f : ds.noise) {
    noisy += f.hue_noise_std > 0.0f;
    short_legs += f.leg_fraction < 1.0f;
    both += f.hue_noise_std > 0.0f && f.leg_fraction < 1.0f;
  }
  EXPECT_EQ(noisy, 150);
  EXPECT_EQ(short_legs, 150);
  EXPECT_LT(both, 150);
}

TEST(GenerateDataset, LatentsMatchLabels) {
  SyntheticSpec spec;
  spec.mode = InputMode::kFeatures;
  const auto ds = generate_dataset(spec, 500, 13);
  int agree = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto post = bayes_classify({ds.latents[i][0], ds.latents[i][1]}, spec);
    const auto best = static_cast<std::size_t>(std::max_element(post.begin(), post.end()) - post.begin());
    agree += best == ds.labels[i];
    const auto f = latent_features({ds.latents[i][0], ds.latents[i][1]});
    const auto img = ds.image(i);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(img[k], f[k], 1e-6);
  }
  EXPECT_GT(agree, 0.8 * static_cast<double>(ds.size()));
}

TEST(GenerateDataset, SameSeedGivesByteIdenticalFiles) {
  SyntheticSpec spec;
  spec.image_size = 32;
  testing::TempDir a, b;
  save_dataset(a.path(), generate_dataset(spec, 20, 99));
  save_dataset(b.path(), generate_dataset(spec, 20, 99));
  for (const char* f : {"manifest.txt", "pixels.f32", "labels.u16", "latents.f32", "noise.f32"}) {
    EXPECT_EQ(file_bytes(a / f), file_bytes(b / f)) << f;
  }
  testing::TempDir c;
  save_dataset(c.path(), generate_dataset(spec, 20, 100));
  EXPECT_NE(file_bytes(a / "pixels.f32"), file_bytes(c / "pixels.f32"));
}

TEST(GenerateDataset, InvalidSpec) {
  SyntheticSpec spec;
  EXPECT_THROW(generate_dataset(spec, 0, 1), ConfigError);
  spec.noisy_fraction = 1.5;
  EXPECT_THROW(generate_dataset(spec, 1, 1), ConfigError);
}

TEST(BayesClassify, ModeAndCentroid) {
  const SyntheticSpec spec;
  for (std::size_t c = 0; c < 4; ++c) {
    const auto post = bayes_classify(class_center(spec, c), spec);
    EXPECT_EQ(static_cast<std::size_t>(std::max_element(post.begin(), post.end()) - post.begin()), c);
  }
  const auto mid = bayes_classify({135.0, 135.0}, spec);
  for (double p : mid) EXPECT_NEAR(p, 0.25, 1e-9);
}

TEST(BayesClassify, AccuracyNearAnalyticValue) {
  const SyntheticSpec spec;
  Rng rng(14);
  const int n = 100000;
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const auto label = static_cast<std::size_t>(i % 4);
    const auto post = bayes_classify(sample_latent(spec, label, rng), spec);
    correct += static_cast<std::size_t>(std::max_element(post.begin(), post.end()) - post.begin()) == label;
  }
  // Per-axis error Phi(-1.5) = 0.0668; accuracy (1 - 0.0668)^2.
  EXPECT_NEAR(static_cast<double>(correct) / n, 0.871, 0.01);
}

}  // namespace
}  // namespace spe
