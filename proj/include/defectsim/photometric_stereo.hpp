#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "defectsim/error.hpp"
#include "defectsim/imaging.hpp"
#include "defectsim/parallel.hpp"

namespace defectsim {

/// Directional lights in the surface frame, each pointing from the surface toward the light.
class LightRig {
 public:
  static constexpr double kUnitTolerance = 1e-6;

  LightRig() = default;

  explicit LightRig(std::vector<Vec3> directions) : directions_(std::move(directions)) {
    detail::require(directions_.size() >= 3, ErrorCode::TooFewLights, "a light rig needs at least 3 lights");
    for (const Vec3& d : directions_) {
      detail::require(d.allFinite() && std::abs(d.norm() - 1.0) <= kUnitTolerance, ErrorCode::InvalidLightDirection,
                      "light directions must be unit vectors");
      detail::require(d.z() > 0.0, ErrorCode::InvalidLightDirection, "lights must lie above the surface (z > 0)");
    }
    detail::require(rank() == 3, ErrorCode::RankDeficientRig, "light directions are coplanar");
  }

  std::size_t count() const { return directions_.size(); }
  const Vec3& operator[](std::size_t k) const { return directions_[k]; }
  const std::vector<Vec3>& directions() const { return directions_; }

  Eigen::MatrixX3d matrix() const {
    Eigen::MatrixX3d m(static_cast<Eigen::Index>(directions_.size()), 3);
    for (std::size_t k = 0; k < directions_.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = directions_[k];
    return m;
  }

  int rank() const {
    Eigen::JacobiSVD<Eigen::MatrixX3d> svd(matrix());
    const auto& s = svd.singularValues();
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) > 1e-9 * s(0)) ++r;
    return r;
  }

 private:
  std::vector<Vec3> directions_;
};

/// `count` lights evenly spaced in azimuth, all tilted `slant_degrees` away from +Z.
inline LightRig octagon_rig(double slant_degrees = 45.0, int count = 8) {
  detail::require(slant_degrees > 0.0 && slant_degrees < 90.0, ErrorCode::InvalidSlant,
                  "slant must lie strictly between 0 and 90 degrees");
  detail::require(count >= 3, ErrorCode::TooFewLights, "a light rig needs at least 3 lights");
  const double slant = slant_degrees * std::numbers::pi / 180.0;
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double azimuth = 2.0 * std::numbers::pi * k / count;
    dirs.emplace_back(std::sin(slant) * std::cos(azimuth), std::sin(slant) * std::sin(azimuth), std::cos(slant));
  }
  return LightRig(std::move(dirs));
}

/// K aligned images of one surface, image k lit by rig light k.
class ImageStack {
 public:
  ImageStack(std::vector<GrayImage> images, LightRig rig) : images_(std::move(images)), rig_(std::move(rig)) {
    detail::require(images_.size() == rig_.count(), ErrorCode::DimensionMismatch,
                    "image count differs from the number of rig lights");
    for (const auto& img : images_)
      detail::require(img.width() == images_.front().width() && img.height() == images_.front().height(),
                      ErrorCode::DimensionMismatch, "stack images differ in size");
  }

  std::size_t count() const { return images_.size(); }
  int width() const { return images_.front().width(); }
  int height() const { return images_.front().height(); }
  const GrayImage& image(std::size_t k) const { return images_[k]; }
  const std::vector<GrayImage>& images() const { return images_; }
  const LightRig& rig() const { return rig_; }

 private:
  std::vector<GrayImage> images_;
  LightRig rig_;
};

struct SolverConfig {
  double shadow_threshold = 0.02;
  double highlight_threshold = 0.98;
  int min_valid_lights = 3;
  /// Condition number of L^T L above which the pseudo-inverse replaces the direct solve.
  double max_condition = 1e8;

  void validate(std::size_t light_count) const {
    detail::require(shadow_threshold >= 0.0 && shadow_threshold <= 1.0 && highlight_threshold >= 0.0 &&
                        highlight_threshold <= 1.0,
                    ErrorCode::InvalidArgument, "thresholds must lie in [0,1]");
    detail::require(shadow_threshold < highlight_threshold, ErrorCode::InvalidArgument,
                    "shadow threshold must be below the highlight threshold");
    detail::require(min_valid_lights >= 3, ErrorCode::InvalidArgument, "min_valid_lights must be at least 3");
    detail::require(static_cast<std::size_t>(min_valid_lights) <= light_count, ErrorCode::InvalidArgument,
                    "min_valid_lights exceeds the number of lights");
  }
};

struct StereoResult {
  NormalMap normals;
  AlbedoMap albedo;
};

namespace detail {

inline constexpr double kSingularRatio = 1e-12;

struct PixelSolution {
  Vec3 normal = NormalMap::placeholder();
  double albedo = 0.0;
  bool valid = false;
};

/// Least-squares Lambertian fit for one pixel: minimizes sum_k (l_k . g - i_k)^2 over
/// the surviving lights, then splits g into albedo |g| and normal g / |g|.
inline PixelSolution solve_pixel(const LightRig& rig, const double* intensities, const SolverConfig& cfg) {
  Eigen::Matrix3d normal_matrix = Eigen::Matrix3d::Zero();
  Vec3 rhs = Vec3::Zero();
  int used = 0;
  for (std::size_t k = 0; k < rig.count(); ++k) {
    const double v = intensities[k];
    if (v < cfg.shadow_threshold || v > cfg.highlight_threshold) continue;
    const Vec3& l = rig[k];
    normal_matrix.noalias() += l * l.transpose();
    rhs.noalias() += v * l;
    ++used;
  }
  PixelSolution out;
  if (used < cfg.min_valid_lights) return out;

  Vec3 g;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal_matrix, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(2);
  // Coplanar survivors leave g undetermined along one axis.
  if (!(hi > 0.0) || lo <= kSingularRatio * hi) return out;
  if (hi / lo <= cfg.max_condition) {
    g = normal_matrix.ldlt().solve(rhs);
  } else {
    g = normal_matrix.completeOrthogonalDecomposition().pseudoInverse() * rhs;
  }
  const double rho = g.norm();
  if (!(rho > 0.0) || !std::isfinite(rho)) return out;
  out.normal = g / rho;
  if (out.normal.z() < 0.0) out.normal = -out.normal;
  out.albedo = rho;
  out.valid = true;
  return out;
}

}  // namespace detail

/// Per-pixel Lambertian photometric stereo. Pixels are independent; the
/// result does not depend on the worker count.
inline StereoResult solve_normals(const ImageStack& stack, const SolverConfig& cfg = {}) {
  cfg.validate(stack.count());
  detail::require(stack.rig().rank() == 3, ErrorCode::RankDeficientRig, "light directions are coplanar");

  const int w = stack.width();
  const int h = stack.height();
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t k_count = stack.count();

  std::vector<Vec3> normals(n, NormalMap::placeholder());
  std::vector<std::uint8_t> valid(n, 0);
  std::vector<double> albedo(n, 0.0);

  parallel_for_chunks(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> obs(k_count);
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t k = 0; k < k_count; ++k) obs[k] = stack.image(k)[i];
      const auto sol = detail::solve_pixel(stack.rig(), obs.data(), cfg);
      if (!sol.valid) continue;
      normals[i] = sol.normal;
      albedo[i] = sol.albedo;
      valid[i] = 1;
    }
  });

  return {NormalMap(w, h, std::move(normals), std::move(valid)), AlbedoMap(w, h, std::move(albedo))};
}

/// Mean absolute curl dp/dy - dq/dx of the gradient field p = -nx/nz, q = -ny/nz,
/// using forward differences over pixels whose right and lower neighbours are valid.
inline double integrability_report(const NormalMap& nm) {
  constexpr double kMinZ = 1e-6;
  auto usable = [&](int x, int y) { return nm.valid(x, y) && nm.at(x, y).z() > kMinZ; };
  auto p = [&](int x, int y) { return -nm.at(x, y).x() / nm.at(x, y).z(); };
  auto q = [&](int x, int y) { return -nm.at(x, y).y() / nm.at(x, y).z(); };

  double total = 0.0;
  std::size_t count = 0;
  for (int y = 0; y + 1 < nm.height(); ++y)
    for (int x = 0; x + 1 < nm.width(); ++x) {
      if (!usable(x, y) || !usable(x + 1, y) || !usable(x, y + 1)) continue;
      const double curl = (p(x, y + 1) - p(x, y)) - (q(x + 1, y) - q(x, y));
      total += std::abs(curl);
      ++count;
    }
  detail::require(count > 0, ErrorCode::NoValidPixels, "normal map has no valid neighbourhoods");
  return total / static_cast<double>(count);
}

}  // namespace defectsim
