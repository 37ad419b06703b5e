#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "defectsim/error.hpp"
#include "defectsim/hash.hpp"
#include "defectsim/imaging.hpp"
#include "defectsim/noise.hpp"

namespace defectsim {

/// Parametric hole: a circle whose rim radius is modulated by one noise
/// channel and whose floor depth is modulated by another.
struct DefectParams {
  double radius_mm = 1.0;
  double depth_mm = 0.5;
  NoiseSpec edge_noise{};
  double edge_amplitude = 0.0;  // fraction of radius, [0, 1)
  NoiseSpec floor_noise{};
  double floor_amplitude = 0.0;  // fraction of depth, [0, 1)
  double profile_power = 1.0;  // >= 1 rounded bowl, < 1 steep-walled cavity
  double resolution = 50.0;  // pixels per mm

  void validate() const {
    detail::require(std::isfinite(radius_mm) && radius_mm > 0.0, ErrorCode::InvalidParams, "radius_mm must be > 0");
    detail::require(std::isfinite(depth_mm) && depth_mm > 0.0, ErrorCode::InvalidParams, "depth_mm must be > 0");
    detail::require(edge_amplitude >= 0.0 && edge_amplitude < 1.0, ErrorCode::InvalidParams,
                    "edge_amplitude must lie in [0,1)");
    detail::require(floor_amplitude >= 0.0 && floor_amplitude < 1.0, ErrorCode::InvalidParams,
                    "floor_amplitude must lie in [0,1)");
    detail::require(std::isfinite(profile_power) && profile_power > 0.0, ErrorCode::InvalidParams,
                    "profile_power must be > 0");
    detail::require(std::isfinite(resolution) && resolution > 0.0, ErrorCode::InvalidParams,
                    "resolution must be > 0");
    edge_noise.validate();
    floor_noise.validate();
  }

  /// Largest rim radius any noise draw can produce.
  double max_radius_mm() const { return radius_mm * (1.0 + edge_amplitude); }

  bool operator==(const DefectParams&) const = default;
};

struct DefectInstance {
  static constexpr double kMaskEpsilon = 1e-6;  // mm

  HeightMap height;  // mm, <= 0 inside the hole, 0 elsewhere
  MaskMap mask;  // 1 where height < -kMaskEpsilon
  DefectParams params;
  std::uint64_t seed = 0;

  /// Side of the square raster in pixels (odd, so one pixel centre sits on the hole centre).
  int size() const { return height.width(); }
  /// Half the raster side in millimetres.
  double half_extent_mm() const { return 0.5 * size() / params.resolution; }

  bool operator==(const DefectInstance&) const = default;
};

/// Raster side for the given parameters: the widest possible rim plus two
/// pixels of padding per side, rounded up to an odd count.
inline int defect_grid_size(const DefectParams& p) {
  int n = static_cast<int>(std::ceil(2.0 * p.max_radius_mm() * p.resolution)) + 4;
  if (n % 2 == 0) ++n;
  return n;
}

inline DefectInstance generate_defect(const DefectParams& params, std::uint64_t seed) {
  params.validate();
  detail::require(2.0 * params.radius_mm * params.resolution >= 3.0, ErrorCode::ResolutionTooLow,
                  "defect spans fewer than 3 pixels");

  // Noise channels are keyed by both the instance seed and each NoiseSpec seed.
  DefectParams p = params;
  p.edge_noise.seed = hash_combine(seed, params.edge_noise.seed, 0xED6EULL);
  p.floor_noise.seed = hash_combine(seed, params.floor_noise.seed, 0xF100EULL);

  const int n = defect_grid_size(p);
  const double half = 0.5 * n;
  std::vector<double> heights(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  std::vector<std::uint32_t> labels(heights.size(), 0);

  for (int j = 0; j < n; ++j) {
    const double y = (half - (j + 0.5)) / p.resolution;
    for (int i = 0; i < n; ++i) {
      const double x = (i + 0.5 - half) / p.resolution;
      const double r = std::hypot(x, y);
      if (r > p.max_radius_mm()) continue;

      double rim = p.radius_mm;
      if (p.edge_amplitude > 0.0) {
        const double theta = std::atan2(y, x);
        rim *= 1.0 + p.edge_amplitude *
                         normalized_noise(p.radius_mm * std::cos(theta), p.radius_mm * std::sin(theta), p.edge_noise);
      }
      if (r > rim) continue;

      const double t = 1.0 - (r / rim) * (r / rim);
      double floor = 1.0;
      if (p.floor_amplitude > 0.0) floor += p.floor_amplitude * normalized_noise(x, y, p.floor_noise);
      double h = -p.depth_mm * std::pow(t, p.profile_power) * floor;
      h = std::min(h, 0.0);
      if (h == 0.0) h = 0.0;  // no negative zero

      const std::size_t idx = static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i);
      heights[idx] = h;
      labels[idx] = h < -DefectInstance::kMaskEpsilon ? 1u : 0u;
    }
  }
  return {HeightMap(n, n, std::move(heights)), MaskMap(n, n, std::move(labels)), params, seed};
}

/// Closed interval for one sampled field.
template <typename T>
struct Range {
  T min{};
  T max{};

  Range() = default;
  Range(T lo, T hi) : min(lo), max(hi) {}
  explicit Range(T v) : min(v), max(v) {}

  bool operator==(const Range&) const = default;
};

struct NoiseRanges {
  std::vector<NoiseKind> kinds{NoiseKind::Fractal, NoiseKind::Turbulence};
  Range<int> octaves{3, 5};
  Range<double> base_frequency{0.5, 2.0};
  Range<double> lacunarity{2.0, 2.0};
  Range<double> gain{0.5, 0.5};
};

struct DefectParamRanges {
  Range<double> radius_mm{0.2, 2.0};
  Range<double> depth_mm{0.1, 1.0};
  Range<double> edge_amplitude{0.0, 0.4};
  Range<double> floor_amplitude{0.0, 0.3};
  Range<double> profile_power{0.3, 2.0};
  Range<double> resolution{20.0, 20.0};
  NoiseRanges edge_noise{};
  NoiseRanges floor_noise{};

  void validate() const;
};

namespace detail {

template <typename T>
void check_range(const Range<T>& r, const char* name, bool lower_ok, bool upper_ok) {
  require(r.min <= r.max, ErrorCode::InvalidRange, std::string(name) + ": min exceeds max");
  require(lower_ok && upper_ok, ErrorCode::InvalidRange, std::string(name) + ": range outside the allowed domain");
}

inline void check_noise_ranges(const NoiseRanges& r, const std::string& prefix) {
  require(!r.kinds.empty(), ErrorCode::InvalidRange, prefix + ".kinds is empty");
  check_range(r.octaves, (prefix + ".octaves").c_str(), r.octaves.min >= 1, true);
  check_range(r.base_frequency, (prefix + ".base_frequency").c_str(), r.base_frequency.min > 0.0,
              std::isfinite(r.base_frequency.max));
  check_range(r.lacunarity, (prefix + ".lacunarity").c_str(), r.lacunarity.min > 1.0, std::isfinite(r.lacunarity.max));
  check_range(r.gain, (prefix + ".gain").c_str(), r.gain.min > 0.0, r.gain.max < 1.0);
}

inline NoiseSpec sample_noise(const NoiseRanges& r, Rng& rng) {
  NoiseSpec s;
  s.kind = r.kinds[uniform_index(rng, r.kinds.size())];
  s.octaves = static_cast<int>(uniform_int(rng, r.octaves.min, r.octaves.max));
  s.base_frequency = uniform_real(rng, r.base_frequency.min, r.base_frequency.max);
  s.lacunarity = uniform_real(rng, r.lacunarity.min, r.lacunarity.max);
  s.gain = uniform_real(rng, r.gain.min, r.gain.max);
  s.seed = rng();
  return s;
}

}  // namespace detail

inline void DefectParamRanges::validate() const {
  using detail::check_range;
  check_range(radius_mm, "radius_mm", radius_mm.min > 0.0, std::isfinite(radius_mm.max));
  check_range(depth_mm, "depth_mm", depth_mm.min > 0.0, std::isfinite(depth_mm.max));
  check_range(edge_amplitude, "edge_amplitude", edge_amplitude.min >= 0.0, edge_amplitude.max < 1.0);
  check_range(floor_amplitude, "floor_amplitude", floor_amplitude.min >= 0.0, floor_amplitude.max < 1.0);
  check_range(profile_power, "profile_power", profile_power.min > 0.0, std::isfinite(profile_power.max));
  check_range(resolution, "resolution", resolution.min > 0.0, std::isfinite(resolution.max));
  detail::check_noise_ranges(edge_noise, "edge_noise");
  detail::check_noise_ranges(floor_noise, "floor_noise");
}

/// Independent uniform draw per field, in declaration order.
inline DefectParams sample_params(const DefectParamRanges& ranges, Rng& rng) {
  ranges.validate();
  DefectParams p;
  p.radius_mm = uniform_real(rng, ranges.radius_mm.min, ranges.radius_mm.max);
  p.depth_mm = uniform_real(rng, ranges.depth_mm.min, ranges.depth_mm.max);
  p.edge_noise = detail::sample_noise(ranges.edge_noise, rng);
  p.edge_amplitude = uniform_real(rng, ranges.edge_amplitude.min, ranges.edge_amplitude.max);
  p.floor_noise = detail::sample_noise(ranges.floor_noise, rng);
  p.floor_amplitude = uniform_real(rng, ranges.floor_amplitude.min, ranges.floor_amplitude.max);
  p.profile_power = uniform_real(rng, ranges.profile_power.min, ranges.profile_power.max);
  p.resolution = uniform_real(rng, ranges.resolution.min, ranges.resolution.max);
  return p;
}

// JSON mapping

inline void to_json(nlohmann::json& j, const NoiseSpec& s) {
  j = {{"kind", to_string(s.kind)},      {"octaves", s.octaves}, {"base_frequency", s.base_frequency},
       {"lacunarity", s.lacunarity}, {"gain", s.gain},       {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, NoiseSpec& s) {
  s = NoiseSpec{};
  if (j.contains("kind")) s.kind = noise_kind_from_string(j.at("kind").get<std::string>());
  s.octaves = j.value("octaves", s.octaves);
  s.base_frequency = j.value("base_frequency", s.base_frequency);
  s.lacunarity = j.value("lacunarity", s.lacunarity);
  s.gain = j.value("gain", s.gain);
  s.seed = j.value("seed", s.seed);
}

inline void to_json(nlohmann::json& j, const DefectParams& p) {
  j = {{"radius_mm", p.radius_mm},
       {"depth_mm", p.depth_mm},
       {"edge_noise", p.edge_noise},
       {"edge_amplitude", p.edge_amplitude},
       {"floor_noise", p.floor_noise},
       {"floor_amplitude", p.floor_amplitude},
       {"profile_power", p.profile_power},
       {"resolution", p.resolution}};
}

inline void from_json(const nlohmann::json& j, DefectParams& p) {
  p = DefectParams{};
  p.radius_mm = j.value("radius_mm", p.radius_mm);
  p.depth_mm = j.value("depth_mm", p.depth_mm);
  if (j.contains("edge_noise")) p.edge_noise = j.at("edge_noise").get<NoiseSpec>();
  p.edge_amplitude = j.value("edge_amplitude", p.edge_amplitude);
  if (j.contains("floor_noise")) p.floor_noise = j.at("floor_noise").get<NoiseSpec>();
  p.floor_amplitude = j.value("floor_amplitude", p.floor_amplitude);
  p.profile_power = j.value("profile_power", p.profile_power);
  p.resolution = j.value("resolution", p.resolution);
}

template <typename T>
void to_json(nlohmann::json& j, const Range<T>& r) {
  j = nlohmann::json::array({r.min, r.max});
}

/// Accepts [min, max], {"min":..,"max":..} or a bare scalar for a degenerate range.
template <typename T>
void from_json(const nlohmann::json& j, Range<T>& r) {
  if (j.is_array()) {
    detail::require(j.size() == 2, ErrorCode::InvalidRange, "range arrays need exactly two entries");
    r = Range<T>(j[0].get<T>(), j[1].get<T>());
  } else if (j.is_object()) {
    r = Range<T>(j.at("min").get<T>(), j.at("max").get<T>());
  } else {
    r = Range<T>(j.get<T>());
  }
}

inline void to_json(nlohmann::json& j, const NoiseRanges& r) {
  std::vector<std::string> kinds;
  for (auto k : r.kinds) kinds.push_back(to_string(k));
  j = {{"kinds", kinds},
       {"octaves", r.octaves},
       {"base_frequency", r.base_frequency},
       {"lacunarity", r.lacunarity},
       {"gain", r.gain}};
}

inline void from_json(const nlohmann::json& j, NoiseRanges& r) {
  r = NoiseRanges{};
  if (j.contains("kinds")) {
    r.kinds.clear();
    for (const auto& k : j.at("kinds")) r.kinds.push_back(noise_kind_from_string(k.get<std::string>()));
  }
  if (j.contains("octaves")) r.octaves = j.at("octaves").get<Range<int>>();
  if (j.contains("base_frequency")) r.base_frequency = j.at("base_frequency").get<Range<double>>();
  if (j.contains("lacunarity")) r.lacunarity = j.at("lacunarity").get<Range<double>>();
  if (j.contains("gain")) r.gain = j.at("gain").get<Range<double>>();
}

inline void to_json(nlohmann::json& j, const DefectParamRanges& r) {
  j = {{"radius_mm", r.radius_mm},
       {"depth_mm", r.depth_mm},
       {"edge_amplitude", r.edge_amplitude},
       {"floor_amplitude", r.floor_amplitude},
       {"profile_power", r.profile_power},
       {"resolution", r.resolution},
       {"edge_noise", r.edge_noise},
       {"floor_noise", r.floor_noise}};
}

inline void from_json(const nlohmann::json& j, DefectParamRanges& r) {
  r = DefectParamRanges{};
  auto read = [&](const char* key, Range<double>& field) {
    if (j.contains(key)) field = j.at(key).get<Range<double>>();
  };
  read("radius_mm", r.radius_mm);
  read("depth_mm", r.depth_mm);
  read("edge_amplitude", r.edge_amplitude);
  read("floor_amplitude", r.floor_amplitude);
  read("profile_power", r.profile_power);
  read("resolution", r.resolution);
  if (j.contains("edge_noise")) r.edge_noise = j.at("edge_noise").get<NoiseRanges>();
  if (j.contains("floor_noise")) r.floor_noise = j.at("floor_noise").get<NoiseRanges>();
}

}  // namespace defectsim
