#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <unordered_map>
#include <vector>

#include "defectsim/defect.hpp"
#include "defectsim/error.hpp"
#include "defectsim/hash.hpp"
#include "defectsim/imaging.hpp"
#include "defectsim/mesh.hpp"
#include "defectsim/parallel.hpp"
#include "defectsim/photometric_stereo.hpp"

namespace defectsim {

struct DirectionalLight {
  Vec3 direction{0.0, 0.0, 1.0};  // unit, surface toward light
  double intensity = 1.0;

  bool operator==(const DirectionalLight&) const = default;
};

/// Pinhole camera without distortion. Pixel (0, 0) is the top-left corner.
struct Camera {
  Vec3 position{0.0, 0.0, 100.0};
  Vec3 look_at{0.0, 0.0, 0.0};
  Vec3 up{0.0, 1.0, 0.0};
  double vfov_deg = 30.0;
  int width = 256;
  int height = 256;

  void validate() const {
    detail::require(vfov_deg > 0.0 && vfov_deg < 180.0, ErrorCode::InvalidScene, "camera FOV must lie in (0, 180)");
    detail::require(width > 0 && height > 0, ErrorCode::InvalidScene, "camera resolution must be positive");
    detail::require((look_at - position).norm() > 0.0, ErrorCode::InvalidScene, "camera looks at its own position");
    detail::require((look_at - position).cross(up).norm() > 0.0, ErrorCode::InvalidScene,
                    "camera up vector is parallel to the view direction");
  }

  Vec3 forward() const { return (look_at - position).normalized(); }
  Vec3 right() const { return forward().cross(up).normalized(); }
  Vec3 true_up() const { return right().cross(forward()); }
  double tan_half_fov() const { return std::tan(0.5 * vfov_deg * std::numbers::pi / 180.0); }
  double aspect() const { return static_cast<double>(width) / height; }

  /// Unit ray direction through continuous pixel coordinates (sx, sy).
  Vec3 ray_direction(double sx, double sy) const {
    const double t = tan_half_fov();
    const double nx = (2.0 * sx / width - 1.0) * t * aspect();
    const double ny = (1.0 - 2.0 * sy / height) * t;
    return (forward() + nx * right() + ny * true_up()).normalized();
  }

  /// Continuous pixel coordinates and view depth of a world point.
  Vec3 project(const Vec3& p) const {
    const Vec3 d = p - position;
    const double z = d.dot(forward());
    const double t = tan_half_fov();
    const double sx = (d.dot(right()) / z / (t * aspect()) + 1.0) * 0.5 * width;
    const double sy = (1.0 - d.dot(true_up()) / z / t) * 0.5 * height;
    return {sx, sy, z};
  }

  bool operator==(const Camera&) const = default;
};

struct Material {
  double albedo = 0.7;
  std::shared_ptr<const AlbedoMap> albedo_map;
  std::shared_ptr<const NormalMap> texture_normals;
  double bump_strength = 1.0;
  double specular_strength = 0.0;
  double specular_exponent = 32.0;

  void validate() const {
    detail::require(std::isfinite(albedo) && albedo >= 0.0, ErrorCode::InvalidScene, "albedo must be >= 0");
    detail::require(std::isfinite(bump_strength) && bump_strength >= 0.0, ErrorCode::InvalidScene,
                    "bump_strength must be >= 0");
    detail::require(std::isfinite(specular_strength) && specular_strength >= 0.0, ErrorCode::InvalidScene,
                    "specular_strength must be >= 0");
    detail::require(std::isfinite(specular_exponent) && specular_exponent > 0.0, ErrorCode::InvalidScene,
                    "specular_exponent must be > 0");
    detail::require(!albedo_map || !albedo_map->empty(), ErrorCode::InvalidScene, "albedo map is empty");
    detail::require(!texture_normals || texture_normals->size() > 0, ErrorCode::InvalidScene,
                    "texture normal map is empty");
  }
};

/// A defect height map pasted onto the mesh's UV chart.
struct DefectPlacement {
  std::shared_ptr<const DefectInstance> instance;
  Vec2 uv_center{0.5, 0.5};
  double uv_scale = 0.02;  // uv units per mm
  double displacement_scale = 1.0;
  std::uint32_t defect_id = 1;

  double uv_half_extent() const { return instance->half_extent_mm() * uv_scale; }
  /// UV size of one height-map texel.
  double uv_texel() const { return uv_scale / instance->params.resolution; }

  void validate() const {
    detail::require(instance != nullptr, ErrorCode::InvalidScene, "placement without a defect instance");
    detail::require(std::isfinite(uv_scale) && uv_scale > 0.0, ErrorCode::InvalidScene, "uv_scale must be > 0");
    detail::require(std::isfinite(displacement_scale) && displacement_scale > 0.0, ErrorCode::InvalidScene,
                    "displacement_scale must be > 0");
    detail::require(defect_id > 0, ErrorCode::InvalidScene, "defect_id must be positive");
    const double h = uv_half_extent();
    detail::require(uv_center.x() - h >= 0.0 && uv_center.x() + h <= 1.0 && uv_center.y() - h >= 0.0 &&
                        uv_center.y() + h <= 1.0,
                    ErrorCode::FootprintOutsideChart, "defect footprint leaves the [0,1]^2 UV chart");
  }

  bool overlaps_box(const Vec2& lo, const Vec2& hi) const {
    const double h = uv_half_extent();
    return lo.x() <= uv_center.x() + h && hi.x() >= uv_center.x() - h && lo.y() <= uv_center.y() + h &&
           hi.y() >= uv_center.y() - h;
  }

  /// Bilinear height in mm at a UV position; 0 outside the height raster.
  double height_at(const Vec2& uv) const {
    const DefectInstance& d = *instance;
    const int n = d.size();
    const double res = d.params.resolution;
    const double half = 0.5 * n;
    const double fx = (uv.x() - uv_center.x()) / uv_scale * res + half - 0.5;
    const double fy = half - (uv.y() - uv_center.y()) / uv_scale * res - 0.5;
    const double x0 = std::floor(fx);
    const double y0 = std::floor(fy);
    const double tx = fx - x0;
    const double ty = fy - y0;
    auto sample = [&](double xi, double yi) {
      if (xi < 0 || yi < 0 || xi >= n || yi >= n) return 0.0;
      return d.height.at(static_cast<int>(xi), static_cast<int>(yi));
    };
    const double top = sample(x0, y0) * (1.0 - tx) + sample(x0 + 1, y0) * tx;
    const double bottom = sample(x0, y0 + 1) * (1.0 - tx) + sample(x0 + 1, y0 + 1) * tx;
    return top * (1.0 - ty) + bottom * ty;
  }
};

struct Scene {
  Mesh mesh;
  Material material;
  std::vector<DefectPlacement> placements;
  std::vector<DirectionalLight> lights;
  Camera camera;
  double background = 0.0;

  void validate() const {
    detail::require(!mesh.triangles.empty(), ErrorCode::EmptyMesh, "scene mesh has no triangles");
    detail::require(!lights.empty(), ErrorCode::NoLights, "scene has no lights");
    for (const auto& l : lights)
      detail::require(std::abs(l.direction.norm() - 1.0) <= 1e-6 && std::isfinite(l.intensity) && l.intensity >= 0.0,
                      ErrorCode::InvalidScene, "lights need a unit direction and intensity >= 0");
    detail::require(background >= 0.0 && background <= 1.0, ErrorCode::InvalidScene, "background must lie in [0,1]");
    mesh.validate();
    material.validate();
    camera.validate();
    for (const auto& p : placements) p.validate();
  }
};

inline constexpr std::size_t kSubdivisionBudget = 10'000'000;
inline constexpr double kDisplacementEpsilon = 1e-6;  // mm

namespace detail {

inline void uv_bounds(const Mesh& m, const Triangle& t, Vec2& lo, Vec2& hi) {
  lo = m.uvs[t[0]].cwiseMin(m.uvs[t[1]]).cwiseMin(m.uvs[t[2]]);
  hi = m.uvs[t[0]].cwiseMax(m.uvs[t[1]]).cwiseMax(m.uvs[t[2]]);
}

inline double max_uv_edge(const Mesh& m, const Triangle& t) {
  return std::max({(m.uvs[t[0]] - m.uvs[t[1]]).norm(), (m.uvs[t[1]] - m.uvs[t[2]]).norm(),
                   (m.uvs[t[2]] - m.uvs[t[0]]).norm()});
}

class Subdivider {
 public:
  Subdivider(Mesh& mesh, std::span<const DefectPlacement> placements, int depth)
      : mesh_(mesh), placements_(placements), depth_(depth) {}

  void run(const Triangle& t, int level, std::vector<Triangle>& out) {
    if (level == depth_ || !overlaps(t)) {
      out.push_back(t);
      detail::require(out.size() <= kSubdivisionBudget, ErrorCode::SubdivisionBudgetExceeded,
                      "displacement subdivision exceeds the triangle budget");
      return;
    }
    const std::uint32_t ab = midpoint(t[0], t[1]);
    const std::uint32_t bc = midpoint(t[1], t[2]);
    const std::uint32_t ca = midpoint(t[2], t[0]);
    run({t[0], ab, ca}, level + 1, out);
    run({ab, t[1], bc}, level + 1, out);
    run({ca, bc, t[2]}, level + 1, out);
    run({ab, bc, ca}, level + 1, out);
  }

 private:
  bool overlaps(const Triangle& t) const {
    Vec2 lo, hi;
    uv_bounds(mesh_, t, lo, hi);
    for (const auto& p : placements_)
      if (p.overlaps_box(lo, hi)) return true;
    return false;
  }

  // Shared edge midpoints keep neighbouring subdivided triangles watertight.
  std::uint32_t midpoint(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t key = (std::uint64_t{std::min(a, b)} << 32) | std::max(a, b);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const auto lo = std::min(a, b);
    const auto hi = std::max(a, b);
    const auto idx = static_cast<std::uint32_t>(mesh_.vertices.size());
    mesh_.vertices.push_back((mesh_.vertices[lo] + mesh_.vertices[hi]) * 0.5);
    mesh_.uvs.push_back((mesh_.uvs[lo] + mesh_.uvs[hi]) * 0.5);
    const Vec3 n = mesh_.normals[lo] + mesh_.normals[hi];
    mesh_.normals.push_back(n.norm() > 0.0 ? Vec3(n.normalized()) : mesh_.normals[lo]);
    cache_.emplace(key, idx);
    return idx;
  }

  Mesh& mesh_;
  std::span<const DefectPlacement> placements_;
  int depth_;
  std::unordered_map<std::uint64_t, std::uint32_t> cache_;
};

}  // namespace detail

/// Subdivides triangles under defect footprints down to one height texel,
/// moves their vertices along the surface normal by height * scale and tags
/// every triangle with a moved vertex with that placement's defect_id.
/// Vertices and triangles away from all footprints are left untouched.
inline Mesh displace_mesh(const Mesh& mesh, std::span<const DefectPlacement> placements) {
  if (placements.empty()) return mesh;
  for (const auto& p : placements) p.validate();

  double texel = std::numeric_limits<double>::infinity();
  for (const auto& p : placements) texel = std::min(texel, p.uv_texel());

  Mesh out = mesh;
  out.tags.clear();
  std::vector<bool> affected(mesh.triangles.size(), false);
  double longest = 0.0;
  std::size_t affected_count = 0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    Vec2 lo, hi;
    detail::uv_bounds(mesh, mesh.triangles[t], lo, hi);
    for (const auto& p : placements)
      if (p.overlaps_box(lo, hi)) {
        affected[t] = true;
        break;
      }
    if (affected[t]) {
      ++affected_count;
      longest = std::max(longest, detail::max_uv_edge(mesh, mesh.triangles[t]));
    }
  }
  int depth = 0;
  while (longest / std::ldexp(1.0, depth) > texel) {
    ++depth;
    detail::require(depth <= 30, ErrorCode::SubdivisionBudgetExceeded, "subdivision depth is unbounded");
  }

  std::vector<Triangle> triangles;
  triangles.reserve(mesh.triangles.size() + affected_count * 16);
  std::vector<std::uint32_t> source_tags;
  detail::Subdivider sub(out, placements, depth);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const std::size_t before = triangles.size();
    if (affected[t])
      sub.run(mesh.triangles[t], 0, triangles);
    else
      triangles.push_back(mesh.triangles[t]);
    source_tags.insert(source_tags.end(), triangles.size() - before, mesh.tag(t));
  }
  out.triangles = std::move(triangles);

  // Per vertex: total offset and the placement with the largest contribution.
  const std::size_t nv = out.vertices.size();
  std::vector<double> offset(nv, 0.0);
  std::vector<double> strongest(nv, 0.0);
  std::vector<std::uint32_t> owner(nv, 0);
  for (std::size_t v = 0; v < nv; ++v) {
    for (const auto& p : placements) {
      const double h = p.height_at(out.uvs[v]) * p.displacement_scale;
      if (h == 0.0) continue;
      offset[v] += h;
      if (std::abs(h) > strongest[v]) {
        strongest[v] = std::abs(h);
        owner[v] = p.defect_id;
      }
    }
  }
  std::vector<bool> moved(nv, false);
  for (std::size_t v = 0; v < nv; ++v) {
    if (offset[v] == 0.0) continue;
    out.vertices[v] += out.normals[v] * offset[v];
    moved[v] = strongest[v] > kDisplacementEpsilon;
  }

  out.tags = std::move(source_tags);
  for (std::size_t t = 0; t < out.triangles.size(); ++t) {
    double best = 0.0;
    for (auto v : out.triangles[t])
      if (moved[v] && strongest[v] > best) {
        best = strongest[v];
        out.tags[t] = owner[v];
      }
  }

  // Shading normals follow the displaced surface for moved vertices only.
  std::vector<Vec3> acc(nv, Vec3::Zero());
  for (const auto& t : out.triangles) {
    if (!moved[t[0]] && !moved[t[1]] && !moved[t[2]]) continue;
    const Vec3 face = (out.vertices[t[1]] - out.vertices[t[0]]).cross(out.vertices[t[2]] - out.vertices[t[0]]);
    for (auto v : t) acc[v] += face;
  }
  for (std::size_t v = 0; v < nv; ++v)
    if (offset[v] != 0.0 && acc[v].norm() > 0.0) out.normals[v] = acc[v].normalized();
  return out;
}

/// Everything the shading model needs at one visible point.
struct SurfacePoint {
  Vec3 position = Vec3::Zero();
  Vec3 normal{0.0, 0.0, 1.0};
  Vec2 uv = Vec2::Zero();
  Vec3 tangent = Vec3::Zero();  // d position / du
  Vec3 bitangent = Vec3::Zero();  // d position / dv
};

namespace detail {

template <typename FieldT>
const typename FieldT::value_type& sample_nearest(const FieldT& f, const Vec2& uv) {
  const int x = std::clamp(static_cast<int>(std::floor(uv.x() * f.width())), 0, f.width() - 1);
  const int y = std::clamp(static_cast<int>(std::floor((1.0 - uv.y()) * f.height())), 0, f.height() - 1);
  return f.at(x, y);
}

inline Vec3 sample_texture_normal(const NormalMap& nm, const Vec2& uv) {
  const int x = std::clamp(static_cast<int>(std::floor(uv.x() * nm.width())), 0, nm.width() - 1);
  const int y = std::clamp(static_cast<int>(std::floor((1.0 - uv.y()) * nm.height())), 0, nm.height() - 1);
  return nm.at(x, y);
}

}  // namespace detail

/// Shading normal after bump perturbation. The texture normal's tangent-plane
/// components are its slopes (x/z, y/z), so bump_strength 1 reproduces the
/// texture normal exactly in an orthonormal UV frame.
inline Vec3 perturbed_normal(const SurfacePoint& sp, const Material& mat) {
  const Vec3 n = sp.normal;
  if (!mat.texture_normals || mat.bump_strength == 0.0) return n;
  const Vec3 tn = detail::sample_texture_normal(*mat.texture_normals, sp.uv);
  if (tn.z() <= 0.0) return n;

  const Vec3 t_raw = sp.tangent - n * n.dot(sp.tangent);
  if (!(t_raw.norm() > 1e-12)) return n;
  const Vec3 t = t_raw.normalized();
  const Vec3 b_raw = sp.bitangent - n * n.dot(sp.bitangent) - t * t.dot(sp.bitangent);
  if (!(b_raw.norm() > 1e-12)) return n;
  const Vec3 b = b_raw.normalized();

  const Vec3 p = n + mat.bump_strength * (t * (tn.x() / tn.z()) + b * (tn.y() / tn.z()));
  return p.normalized();
}

/// Lambertian plus Blinn specular, summed over lights. Not clamped; callers
/// clamp to [0, 1] on write-out.
inline double shade(const SurfacePoint& sp, const Material& mat, std::span<const DirectionalLight> lights,
                    const Vec3& view_dir) {
  const Vec3 n = perturbed_normal(sp, mat);
  const double albedo = mat.albedo_map ? detail::sample_nearest(*mat.albedo_map, sp.uv) : mat.albedo;
  double total = 0.0;
  for (const auto& light : lights) {
    if (light.intensity == 0.0) continue;
    double term = albedo * std::max(0.0, n.dot(light.direction));
    if (mat.specular_strength > 0.0) {
      const Vec3 half = light.direction + view_dir;
      if (half.norm() > 0.0)
        term += mat.specular_strength * std::pow(std::max(0.0, n.dot(half.normalized())), mat.specular_exponent);
    }
    total += light.intensity * term;
  }
  return total;
}

struct RenderOutput {
  GrayImage image;
  MaskMap mask;
  Camera camera;
  std::uint64_t scene_hash = 0;
};

inline std::uint64_t scene_hash(const Scene& s) {
  Fnv1a h;
  hash_mesh(h, s.mesh);
  const auto& m = s.material;
  const double mat[] = {m.albedo, m.bump_strength, m.specular_strength, m.specular_exponent};
  h.update(mat, sizeof mat);
  if (m.albedo_map) h.update(m.albedo_map->data());
  if (m.texture_normals) {
    for (const auto& n : m.texture_normals->normals()) h.update(n.data(), sizeof(double) * 3);
    h.update(m.texture_normals->validity());
  }
  for (const auto& p : s.placements) {
    h.update(p.instance->height.data());
    h.update(&p.instance->seed, sizeof p.instance->seed);
    const double v[] = {p.uv_center.x(), p.uv_center.y(), p.uv_scale, p.displacement_scale};
    h.update(v, sizeof v);
    h.update(&p.defect_id, sizeof p.defect_id);
  }
  for (const auto& l : s.lights) {
    const double v[] = {l.direction.x(), l.direction.y(), l.direction.z(), l.intensity};
    h.update(v, sizeof v);
  }
  const auto& c = s.camera;
  const double cam[] = {c.position.x(), c.position.y(), c.position.z(), c.look_at.x(), c.look_at.y(),
                        c.look_at.z(),  c.up.x(),       c.up.y(),       c.up.z(),      c.vfov_deg};
  h.update(cam, sizeof cam);
  const int res[] = {c.width, c.height};
  h.update(res, sizeof res);
  h.update(&s.background, sizeof s.background);
  return h.digest();
}

inline constexpr std::uint32_t kNoTriangle = std::numeric_limits<std::uint32_t>::max();

/// Displaced geometry plus the nearest triangle per pixel; independent of lighting.
class VisibilityBuffer {
 public:
  static constexpr double kNearPlane = 1e-6;

  VisibilityBuffer(const Scene& scene) : camera_(scene.camera), mesh_(displace_mesh(scene.mesh, scene.placements)) {
    const int w = camera_.width;
    const int h = camera_.height;
    const auto npix = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    triangle_.assign(npix, kNoTriangle);
    depth_.assign(npix, std::numeric_limits<double>::infinity());

    projected_.resize(mesh_.vertices.size());
    for (std::size_t v = 0; v < mesh_.vertices.size(); ++v) projected_[v] = camera_.project(mesh_.vertices[v]);

    // Triangles crossing the near plane are dropped.
    struct Setup {
      std::uint32_t index;
      int x0, x1, y0, y1;
    };
    std::vector<Setup> setups;
    for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
      const auto& tri = mesh_.triangles[t];
      const Vec3& a = projected_[tri[0]];
      const Vec3& b = projected_[tri[1]];
      const Vec3& c = projected_[tri[2]];
      if (a.z() <= kNearPlane || b.z() <= kNearPlane || c.z() <= kNearPlane) continue;
      const double minx = std::min({a.x(), b.x(), c.x()});
      const double maxx = std::max({a.x(), b.x(), c.x()});
      const double miny = std::min({a.y(), b.y(), c.y()});
      const double maxy = std::max({a.y(), b.y(), c.y()});
      // Pixel centres px + 0.5 inside [min, max].
      const int x0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
      const int x1 = std::min(w - 1, static_cast<int>(std::floor(maxx - 0.5)));
      const int y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
      const int y1 = std::min(h - 1, static_cast<int>(std::floor(maxy - 0.5)));
      if (x0 > x1 || y0 > y1) continue;
      setups.push_back({static_cast<std::uint32_t>(t), x0, x1, y0, y1});
    }

    // Row bands are independent; within a pixel, triangles arrive in index
    // order and only a strictly nearer one replaces the current winner.
    parallel_for_chunks(static_cast<std::size_t>(h), [&](std::size_t row_begin, std::size_t row_end) {
      for (const auto& s : setups) {
        const int ya = std::max(s.y0, static_cast<int>(row_begin));
        const int yb = std::min(s.y1, static_cast<int>(row_end) - 1);
        if (ya > yb) continue;
        const auto& tri = mesh_.triangles[s.index];
        const Vec3& a = projected_[tri[0]];
        const Vec3& b = projected_[tri[1]];
        const Vec3& c = projected_[tri[2]];
        const double area = edge(a, b, c.x(), c.y());
        if (area == 0.0) continue;
        for (int y = ya; y <= yb; ++y)
          for (int x = s.x0; x <= s.x1; ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            const double w0 = edge(b, c, px, py) / area;
            const double w1 = edge(c, a, px, py) / area;
            const double w2 = edge(a, b, px, py) / area;
            if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
            const double z = 1.0 / (w0 / a.z() + w1 / b.z() + w2 / c.z());
            const auto i = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
            if (z < depth_[i]) {
              depth_[i] = z;
              triangle_[i] = s.index;
            }
          }
      }
    });
  }

  const Mesh& mesh() const { return mesh_; }
  const Camera& camera() const { return camera_; }
  std::uint32_t triangle_at(int x, int y) const {
    return triangle_[static_cast<std::size_t>(y) * camera_.width + static_cast<std::size_t>(x)];
  }
  std::span<const std::uint32_t> triangles() const { return triangle_; }

  MaskMap mask() const {
    std::vector<std::uint32_t> labels(triangle_.size(), 0);
    for (std::size_t i = 0; i < triangle_.size(); ++i)
      if (triangle_[i] != kNoTriangle) labels[i] = mesh_.tag(triangle_[i]);
    return MaskMap(camera_.width, camera_.height, std::move(labels));
  }

  /// Perspective-correct surface attributes of triangle t seen through pixel (x, y).
  SurfacePoint surface_point(std::uint32_t t, int x, int y) const {
    const auto& tri = mesh_.triangles[t];
    const Vec3& a = projected_[tri[0]];
    const Vec3& b = projected_[tri[1]];
    const Vec3& c = projected_[tri[2]];
    const double px = x + 0.5;
    const double py = y + 0.5;
    const double area = edge(a, b, c.x(), c.y());
    double w0 = edge(b, c, px, py) / area / a.z();
    double w1 = edge(c, a, px, py) / area / b.z();
    double w2 = edge(a, b, px, py) / area / c.z();
    const double sum = w0 + w1 + w2;
    w0 /= sum;
    w1 /= sum;
    w2 /= sum;

    SurfacePoint sp;
    sp.position = w0 * mesh_.vertices[tri[0]] + w1 * mesh_.vertices[tri[1]] + w2 * mesh_.vertices[tri[2]];
    const Vec3 n = w0 * mesh_.normals[tri[0]] + w1 * mesh_.normals[tri[1]] + w2 * mesh_.normals[tri[2]];
    sp.normal = n.norm() > 0.0 ? Vec3(n.normalized()) : mesh_.normals[tri[0]];
    sp.uv = w0 * mesh_.uvs[tri[0]] + w1 * mesh_.uvs[tri[1]] + w2 * mesh_.uvs[tri[2]];

    const Vec3 e1 = mesh_.vertices[tri[1]] - mesh_.vertices[tri[0]];
    const Vec3 e2 = mesh_.vertices[tri[2]] - mesh_.vertices[tri[0]];
    const Vec2 d1 = mesh_.uvs[tri[1]] - mesh_.uvs[tri[0]];
    const Vec2 d2 = mesh_.uvs[tri[2]] - mesh_.uvs[tri[0]];
    const double det = d1.x() * d2.y() - d2.x() * d1.y();
    if (det != 0.0) {
      sp.tangent = (e1 * d2.y() - e2 * d1.y()) / det;
      sp.bitangent = (e2 * d1.x() - e1 * d2.x()) / det;
    }
    return sp;
  }

 private:
  static double edge(const Vec3& a, const Vec3& b, double px, double py) {
    return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
  }

  Camera camera_;
  Mesh mesh_;
  std::vector<Vec3> projected_;
  std::vector<std::uint32_t> triangle_;
  std::vector<double> depth_;
};

/// Shades every visible pixel of `vis` with the given lights and material.
inline GrayImage shade_image(const VisibilityBuffer& vis, const Material& mat, std::span<const DirectionalLight> lights,
                             double background) {
  const Camera& cam = vis.camera();
  const auto npix = static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height);
  std::vector<double> pixels(npix, background);
  parallel_for(npix, [&](std::size_t i) {
    const int x = static_cast<int>(i % static_cast<std::size_t>(cam.width));
    const int y = static_cast<int>(i / static_cast<std::size_t>(cam.width));
    const std::uint32_t t = vis.triangle_at(x, y);
    if (t == kNoTriangle) return;
    const SurfacePoint sp = vis.surface_point(t, x, y);
    const Vec3 view = (cam.position - sp.position).normalized();
    pixels[i] = std::clamp(shade(sp, mat, lights, view), 0.0, 1.0);
  });
  return GrayImage(cam.width, cam.height, std::move(pixels));
}

inline RenderOutput render(const Scene& scene) {
  scene.validate();
  const VisibilityBuffer vis(scene);
  return {shade_image(vis, scene.material, scene.lights, scene.background), vis.mask(), scene.camera,
          scene_hash(scene)};
}

/// One Lambertian-only render per rig light (intensity 1), sharing a single
/// visibility pass. Intended for a long-focal camera facing the plate.
inline ImageStack render_stack_for_stereo(const Scene& scene, const LightRig& rig) {
  Scene base = scene;
  base.lights = {DirectionalLight{rig[0], 1.0}};
  base.validate();
  Material lambert = scene.material;
  lambert.specular_strength = 0.0;
  const VisibilityBuffer vis(base);
  std::vector<GrayImage> images;
  images.reserve(rig.count());
  for (std::size_t k = 0; k < rig.count(); ++k) {
    const DirectionalLight light{rig[k], 1.0};
    images.push_back(shade_image(vis, lambert, std::span<const DirectionalLight>(&light, 1), scene.background));
  }
  return ImageStack(std::move(images), rig);
}

}  // namespace defectsim
