#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "defectsim/error.hpp"

namespace defectsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

namespace field_policy {

struct UnitInterval {
  static constexpr const char* name = "GrayImage";
  static bool accepts(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }
};

struct NonNegative {
  static constexpr const char* name = "AlbedoMap";
  static bool accepts(double v) { return std::isfinite(v) && v >= 0.0; }
};

struct Finite {
  static constexpr const char* name = "HeightMap";
  static bool accepts(double v) { return std::isfinite(v); }
};

struct Label {
  static constexpr const char* name = "MaskMap";
  static bool accepts(std::uint32_t) { return true; }
};

}  // namespace field_policy

/// Immutable row-major raster whose values are checked by Policy on construction.
template <typename T, typename Policy>
class Field {
 public:
  using value_type = T;

  Field() = default;

  Field(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    detail::require(width >= 0 && height >= 0, ErrorCode::InvalidArgument,
                    std::string(Policy::name) + " has negative dimensions");
    detail::require(data_.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
                    ErrorCode::DimensionMismatch,
                    std::string(Policy::name) + " data length differs from width*height");
    for (const T& v : data_)
      detail::require(Policy::accepts(v), ErrorCode::InvalidValue,
                      std::string(Policy::name) + " holds an out-of-range or non-finite value");
  }

  Field(int width, int height, T fill)
      : Field(width, height,
              std::vector<T>(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)),
                             fill)) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  const T& at(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
  }
  const T& operator[](std::size_t i) const { return data_[i]; }
  std::span<const T> data() const { return data_; }

  bool operator==(const Field&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Field<double, field_policy::UnitInterval>;
using AlbedoMap = Field<double, field_policy::NonNegative>;
/// Heights in millimetres; negative values are depressions.
using HeightMap = Field<double, field_policy::Finite>;
/// Per-pixel defect IDs, 0 = background.
using MaskMap = Field<std::uint32_t, field_policy::Label>;

inline std::uint32_t max_label(const MaskMap& mask) {
  std::uint32_t m = 0;
  for (auto v : mask.data()) m = std::max(m, v);
  return m;
}

/// Tangent-space unit normals (+Z out of the surface) with a validity flag.
class NormalMap {
 public:
  static constexpr double kUnitTolerance = 1e-6;
  static Vec3 placeholder() { return {0.0, 0.0, 1.0}; }

  NormalMap() = default;

  /// Invalid pixels are reset to the placeholder normal.
  NormalMap(int width, int height, std::vector<Vec3> normals, std::vector<std::uint8_t> valid)
      : width_(width), height_(height), normals_(std::move(normals)), valid_(std::move(valid)) {
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    detail::require(width >= 0 && height >= 0, ErrorCode::InvalidArgument, "NormalMap has negative dimensions");
    detail::require(normals_.size() == n && valid_.size() == n, ErrorCode::DimensionMismatch,
                    "NormalMap data length differs from width*height");
    for (std::size_t i = 0; i < n; ++i) {
      if (!valid_[i]) {
        normals_[i] = placeholder();
        continue;
      }
      const Vec3& v = normals_[i];
      detail::require(v.allFinite(), ErrorCode::InvalidValue, "NormalMap holds a non-finite normal");
      detail::require(std::abs(v.norm() - 1.0) <= kUnitTolerance && v.z() >= 0.0, ErrorCode::InvalidValue,
                      "NormalMap holds a non-unit or back-facing normal");
      valid_[i] = 1;
    }
  }

  /// All pixels valid.
  NormalMap(int width, int height, std::vector<Vec3> normals)
      : NormalMap(width, height, std::move(normals),
                  std::vector<std::uint8_t>(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 1)) {}

  static NormalMap constant(int width, int height, const Vec3& n) {
    const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    return NormalMap(width, height, std::vector<Vec3>(count, n.normalized()));
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return normals_.size(); }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  const Vec3& at(int x, int y) const { return normals_[index(x, y)]; }
  bool valid(int x, int y) const { return valid_[index(x, y)] != 0; }
  const Vec3& operator[](std::size_t i) const { return normals_[i]; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }

  std::span<const Vec3> normals() const { return normals_; }
  std::span<const std::uint8_t> validity() const { return valid_; }

  std::size_t valid_count() const {
    std::size_t c = 0;
    for (auto v : valid_) c += v;
    return c;
  }

  bool operator==(const NormalMap& o) const {
    return width_ == o.width_ && height_ == o.height_ && normals_ == o.normals_ && valid_ == o.valid_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Vec3> normals_;
  std::vector<std::uint8_t> valid_;
};

/// Interleaved 8-bit RGB raster.
struct Rgb8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Rgb8Image() = default;
  Rgb8Image(int w, int h)
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0) {}

  std::uint8_t* pixel(int x, int y) {
    return data.data() + (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  }
  const std::uint8_t* pixel(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  }

  bool operator==(const Rgb8Image&) const = default;
};

// Tangent-space encoding: channel = round_half_up((n + 1) / 2 * 255).

inline std::uint8_t encode_normal_component(double c) {
  const double scaled = std::floor((c + 1.0) * 0.5 * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

inline std::array<std::uint8_t, 3> encode_normal(const Vec3& n) {
  return {encode_normal_component(n.x()), encode_normal_component(n.y()), encode_normal_component(n.z())};
}

/// Returns the zero vector when the code decodes to a zero-length vector.
inline Vec3 decode_normal(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const Vec3 v(2.0 * r / 255.0 - 1.0, 2.0 * g / 255.0 - 1.0, 2.0 * b / 255.0 - 1.0);
  const double len = v.norm();
  if (len == 0.0) return Vec3::Zero();
  return v / len;
}

inline Rgb8Image encode_normal_map(const NormalMap& nm) {
  Rgb8Image out(nm.width(), nm.height());
  for (int y = 0; y < nm.height(); ++y)
    for (int x = 0; x < nm.width(); ++x) {
      const auto c = encode_normal(nm.at(x, y));
      std::copy(c.begin(), c.end(), out.pixel(x, y));
    }
  return out;
}

/// Zero-length and back-facing (z < 0) codes decode to invalid pixels.
inline NormalMap decode_normal_map(const Rgb8Image& raster) {
  detail::require(raster.width > 0 && raster.height > 0, ErrorCode::EmptyRaster, "normal raster has zero size");
  detail::require(raster.data.size() == static_cast<std::size_t>(raster.width) * raster.height * 3,
                  ErrorCode::DimensionMismatch, "normal raster data length differs from width*height*3");
  const auto count = static_cast<std::size_t>(raster.width) * static_cast<std::size_t>(raster.height);
  std::vector<Vec3> normals(count);
  std::vector<std::uint8_t> valid(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* p = raster.data.data() + 3 * i;
    const Vec3 n = decode_normal(p[0], p[1], p[2]);
    if (n.isZero() || n.z() < 0.0) continue;
    normals[i] = n;
    valid[i] = 1;
  }
  return NormalMap(raster.width, raster.height, std::move(normals), std::move(valid));
}

inline double angle_between_deg(const Vec3& a, const Vec3& b) {
  // atan2 form stays accurate for nearly parallel vectors.
  return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / 3.14159265358979323846;
}

}  // namespace defectsim
