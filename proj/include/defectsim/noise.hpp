#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "defectsim/error.hpp"
#include "defectsim/hash.hpp"

namespace defectsim {

enum class NoiseKind { Fractal, Turbulence };

inline std::string to_string(NoiseKind k) { return k == NoiseKind::Fractal ? "fractal" : "turbulence"; }

inline NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "fractal" || s == "fbm") return NoiseKind::Fractal;
  if (s == "turbulence") return NoiseKind::Turbulence;
  throw Error(ErrorCode::InvalidParams, "unknown noise kind '" + s + "'");
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Fractal;
  int octaves = 4;
  double base_frequency = 1.0;  // cycles per mm
  double lacunarity = 2.0;
  double gain = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(octaves >= 1, ErrorCode::InvalidParams, "noise octaves must be >= 1");
    detail::require(std::isfinite(base_frequency) && base_frequency > 0.0, ErrorCode::InvalidParams,
                    "noise base_frequency must be > 0");
    detail::require(std::isfinite(lacunarity) && lacunarity > 1.0, ErrorCode::InvalidParams,
                    "noise lacunarity must be > 1");
    detail::require(gain > 0.0 && gain < 1.0, ErrorCode::InvalidParams, "noise gain must lie in (0,1)");
  }

  bool operator==(const NoiseSpec&) const = default;
};

namespace detail {

// Unit gradient for a lattice corner, from a continuous hashed angle.
inline void lattice_gradient(std::int64_t ix, std::int64_t iy, std::uint64_t seed, double& gx, double& gy) {
  const std::uint64_t h = hash_combine(seed, static_cast<std::uint64_t>(ix), static_cast<std::uint64_t>(iy));
  const double angle = static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 * std::numbers::pi;
  gx = std::cos(angle);
  gy = std::sin(angle);
}

inline double quintic_fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

}  // namespace detail

/// Perlin-style lattice gradient noise in lattice units. Exactly zero at
/// integer lattice points, C^2 between them (quintic fade), in [-1, 1].
inline double gradient_noise(double x, double y, std::uint64_t seed) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double dx = x - fx;
  const double dy = y - fy;

  double gx, gy;
  detail::lattice_gradient(ix, iy, seed, gx, gy);
  const double n00 = gx * dx + gy * dy;
  detail::lattice_gradient(ix + 1, iy, seed, gx, gy);
  const double n10 = gx * (dx - 1.0) + gy * dy;
  detail::lattice_gradient(ix, iy + 1, seed, gx, gy);
  const double n01 = gx * dx + gy * (dy - 1.0);
  detail::lattice_gradient(ix + 1, iy + 1, seed, gx, gy);
  const double n11 = gx * (dx - 1.0) + gy * (dy - 1.0);

  const double u = detail::quintic_fade(dx);
  const double v = detail::quintic_fade(dy);
  const double nx0 = n00 + u * (n10 - n00);
  const double nx1 = n01 + u * (n11 - n01);
  // 2D unit-gradient noise is bounded by sqrt(2)/2; rescale to [-1, 1].
  const double value = std::numbers::sqrt2 * (nx0 + v * (nx1 - nx0));
  return std::clamp(value, -1.0, 1.0);
}

inline std::uint64_t octave_seed(std::uint64_t seed, int octave) {
  return hash_combine(seed, static_cast<std::uint64_t>(octave));
}

inline double octave_frequency(const NoiseSpec& spec, int octave) {
  return spec.base_frequency * std::pow(spec.lacunarity, octave);
}

/// Sum of gain^o weights; bounds |fbm| and turbulence.
inline double octave_weight_sum(const NoiseSpec& spec) {
  return (1.0 - std::pow(spec.gain, spec.octaves)) / (1.0 - spec.gain);
}

/// Fractal sum of gradient-noise octaves at (x, y) millimetres.
inline double fbm(double x, double y, const NoiseSpec& spec) {
  double sum = 0.0;
  double amplitude = 1.0;
  for (int o = 0; o < spec.octaves; ++o) {
    const double f = octave_frequency(spec, o);
    sum += amplitude * gradient_noise(x * f, y * f, octave_seed(spec.seed, o));
    amplitude *= spec.gain;
  }
  return sum;
}

/// Same octave sum over |noise|; non-negative.
inline double turbulence(double x, double y, const NoiseSpec& spec) {
  double sum = 0.0;
  double amplitude = 1.0;
  for (int o = 0; o < spec.octaves; ++o) {
    const double f = octave_frequency(spec, o);
    sum += amplitude * std::abs(gradient_noise(x * f, y * f, octave_seed(spec.seed, o)));
    amplitude *= spec.gain;
  }
  return sum;
}

/// fbm or turbulence divided by the octave weight sum: in [-1, 1] or [0, 1].
inline double normalized_noise(double x, double y, const NoiseSpec& spec) {
  const double raw = spec.kind == NoiseKind::Fractal ? fbm(x, y, spec) : turbulence(x, y, spec);
  return raw / octave_weight_sum(spec);
}

}  // namespace defectsim
