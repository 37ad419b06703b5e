#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "defectsim/noise.hpp"

using namespace defectsim;

namespace {

NoiseSpec spec_with(NoiseKind kind, int octaves, double f, double lac, double gain, std::uint64_t seed) {
  NoiseSpec s;
  s.kind = kind;
  s.octaves = octaves;
  s.base_frequency = f;
  s.lacunarity = lac;
  s.gain = gain;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(GradientNoise, ZeroAtLatticePoints) {
  for (int y = -20; y <= 20; ++y)
    for (int x = -20; x <= 20; ++x)
      for (std::uint64_t seed : {0ULL, 1ULL, 0xdeadbeefULL}) EXPECT_EQ(gradient_noise(x, y, seed), 0.0);
  EXPECT_EQ(gradient_noise(1e6, -3e5, 9), 0.0);
}

TEST(GradientNoise, DeterministicAndSeedSensitive) {
  EXPECT_EQ(gradient_noise(0.3, 7.7, 5), gradient_noise(0.3, 7.7, 5));
  EXPECT_NE(gradient_noise(0.3, 7.7, 5), gradient_noise(0.3, 7.7, 6));
}

TEST(GradientNoise, BoundedAndReachesNearBound) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  double peak = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double v = gradient_noise(u(rng), u(rng), 17);
    ASSERT_LE(std::abs(v), 1.0);
    peak = std::max(peak, std::abs(v));
  }
  EXPECT_GT(peak, 0.8);
}

TEST(GradientNoise, ContinuousAcrossCellEdges) {
  for (double y : {0.25, 3.6, -2.1}) {
    const double below = gradient_noise(4.0 - 1e-9, y, 3);
    const double above = gradient_noise(4.0 + 1e-9, y, 3);
    EXPECT_NEAR(below, above, 1e-7);
  }
}

TEST(Fbm, SingleOctaveIsOneNoiseCall) {
  const NoiseSpec s = spec_with(NoiseKind::Fractal, 1, 1.7, 2.0, 0.5, 77);
  for (double x : {0.1, 2.3, -4.4})
    EXPECT_EQ(fbm(x, 0.6 * x, s), gradient_noise(x * 1.7, 0.6 * x * 1.7, octave_seed(77, 0)));
}

TEST(Fbm, MatchesManualOctaveSum) {
  const NoiseSpec s = spec_with(NoiseKind::Fractal, 3, 0.8, 2.3, 0.6, 12);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng), y = u(rng);
    double manual = 0.0, manual_turb = 0.0;
    for (int o = 0; o < 3; ++o) {
      const double f = 0.8 * std::pow(2.3, o);
      const double n = gradient_noise(x * f, y * f, octave_seed(12, o));
      manual += std::pow(0.6, o) * n;
      manual_turb += std::pow(0.6, o) * std::abs(n);
    }
    EXPECT_NEAR(fbm(x, y, s), manual, 1e-12);
    EXPECT_NEAR(turbulence(x, y, s), manual_turb, 1e-12);
  }
}

TEST(Fbm, GeometricBounds) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  const NoiseSpec s = spec_with(NoiseKind::Fractal, 5, 1.0, 2.0, 0.5, 4);
  const double bound = (1.0 - std::pow(0.5, 5)) / 0.5;
  EXPECT_DOUBLE_EQ(octave_weight_sum(s), bound);
  for (int i = 0; i < 100000; ++i) {
    const double x = u(rng), y = u(rng);
    EXPECT_LE(std::abs(fbm(x, y, s)), bound);
    const double t = turbulence(x, y, s);
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, bound);
    const double nf = normalized_noise(x, y, s);
    EXPECT_LE(std::abs(nf), 1.0);
  }
}

TEST(Turbulence, ZeroAtLatticeForOneOctave) {
  const NoiseSpec s = spec_with(NoiseKind::Turbulence, 1, 1.0, 2.0, 0.5, 8);
  EXPECT_EQ(turbulence(3.0, -5.0, s), 0.0);
}

TEST(NoiseSpecValidation, RejectsOutOfRange) {
  EXPECT_THROW(spec_with(NoiseKind::Fractal, 0, 1, 2, 0.5, 0).validate(), Error);
  EXPECT_THROW(spec_with(NoiseKind::Fractal, 2, 0, 2, 0.5, 0).validate(), Error);
  EXPECT_THROW(spec_with(NoiseKind::Fractal, 2, 1, 1, 0.5, 0).validate(), Error);
  EXPECT_THROW(spec_with(NoiseKind::Fractal, 2, 1, 2, 1.0, 0).validate(), Error);
  EXPECT_NO_THROW(spec_with(NoiseKind::Turbulence, 2, 1, 2, 0.5, 0).validate());
  EXPECT_EQ(noise_kind_from_string("fbm"), NoiseKind::Fractal);
  EXPECT_THROW(noise_kind_from_string("perlin"), Error);
}
