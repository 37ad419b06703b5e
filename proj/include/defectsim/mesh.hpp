#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "defectsim/error.hpp"
#include "defectsim/hash.hpp"
#include "defectsim/imaging.hpp"

namespace defectsim {

namespace fs = std::filesystem;

using Triangle = std::array<std::uint32_t, 3>;

/// Triangle mesh in millimetres with per-vertex UVs and unit normals.
/// `tags` holds a defect ID per triangle (0 = none) once displaced.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Vec2> uvs;
  std::vector<Vec3> normals;
  std::vector<std::uint32_t> tags;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }

  std::uint32_t tag(std::size_t t) const { return tags.empty() ? 0u : tags[t]; }

  void validate() const {
    const auto nv = vertices.size();
    detail::require(uvs.size() == nv && normals.size() == nv, ErrorCode::InvalidMesh,
                    "uvs and normals must have one entry per vertex");
    detail::require(tags.empty() || tags.size() == triangles.size(), ErrorCode::InvalidMesh,
                    "tags must have one entry per triangle");
    for (std::size_t i = 0; i < nv; ++i) {
      detail::require(vertices[i].allFinite() && uvs[i].allFinite(), ErrorCode::InvalidMesh, "non-finite vertex data");
      detail::require(std::abs(normals[i].norm() - 1.0) <= 1e-6, ErrorCode::InvalidMesh, "vertex normals must be unit");
    }
    for (const auto& t : triangles) {
      for (auto idx : t) detail::require(idx < nv, ErrorCode::InvalidMesh, "triangle index out of range");
      const Vec3 e1 = vertices[t[1]] - vertices[t[0]];
      const Vec3 e2 = vertices[t[2]] - vertices[t[0]];
      detail::require(e1.cross(e2).norm() > 0.0, ErrorCode::InvalidMesh, "degenerate triangle");
    }
  }

  bool operator==(const Mesh&) const = default;
};

inline void hash_mesh(Fnv1a& h, const Mesh& m) {
  for (const auto& v : m.vertices) h.update(v.data(), sizeof(double) * 3);
  for (const auto& t : m.triangles) h.update(t.data(), sizeof(std::uint32_t) * 3);
  for (const auto& uv : m.uvs) h.update(uv.data(), sizeof(double) * 2);
  for (const auto& n : m.normals) h.update(n.data(), sizeof(double) * 3);
  h.update(std::span<const std::uint32_t>(m.tags));
}

/// Flat plate in the z = 0 plane facing +Z, centred at the origin, split into
/// segments x segments quads. u runs along +X and v along +Y.
inline Mesh make_plate(double width_mm, double height_mm, int segments) {
  detail::require(width_mm > 0.0 && height_mm > 0.0 && segments >= 1, ErrorCode::InvalidArgument,
                  "plate needs positive size and at least one segment");
  Mesh m;
  const int n = segments + 1;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double u = static_cast<double>(i) / segments;
      const double v = static_cast<double>(j) / segments;
      m.vertices.emplace_back((u - 0.5) * width_mm, (v - 0.5) * height_mm, 0.0);
      m.uvs.emplace_back(u, v);
      m.normals.emplace_back(0.0, 0.0, 1.0);
    }
  for (int j = 0; j < segments; ++j)
    for (int i = 0; i < segments; ++i) {
      const auto a = static_cast<std::uint32_t>(j * n + i);
      const auto b = a + 1;
      const auto c = a + static_cast<std::uint32_t>(n);
      const auto d = c + 1;
      m.triangles.push_back({a, b, d});
      m.triangles.push_back({a, d, c});
    }
  return m;
}

/// Area-weighted vertex normals for the given triangles.
inline std::vector<Vec3> compute_vertex_normals(const std::vector<Vec3>& vertices,
                                                const std::vector<Triangle>& triangles) {
  std::vector<Vec3> acc(vertices.size(), Vec3::Zero());
  for (const auto& t : triangles) {
    const Vec3 face = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
    for (auto idx : t) acc[idx] += face;
  }
  for (auto& n : acc) n = n.norm() > 0.0 ? Vec3(n.normalized()) : Vec3(0.0, 0.0, 1.0);
  return acc;
}

/// Reads a Wavefront OBJ with UVs. Polygons are fan-triangulated; vertex
/// normals are computed when the file has none.
inline Mesh load_obj(const fs::path& path) {
  std::ifstream in(path);
  detail::require(static_cast<bool>(in), ErrorCode::FileNotFound, path.string());

  std::vector<Vec3> positions, file_normals;
  std::vector<Vec2> texcoords;
  std::map<std::tuple<long, long, long>, std::uint32_t> corner_index;
  Mesh m;
  bool any_normals = true;

  auto resolve = [](long idx, std::size_t count) -> long {
    return idx < 0 ? static_cast<long>(count) + idx : idx - 1;
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    auto bad = [&](const std::string& what) {
      return Error(ErrorCode::UnsupportedFormat, path.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    if (key == "v") {
      Vec3 p;
      if (!(ss >> p.x() >> p.y() >> p.z())) throw bad("malformed vertex");
      positions.push_back(p);
    } else if (key == "vt") {
      Vec2 t;
      if (!(ss >> t.x() >> t.y())) throw bad("malformed texture coordinate");
      texcoords.push_back(t);
    } else if (key == "vn") {
      Vec3 n;
      if (!(ss >> n.x() >> n.y() >> n.z())) throw bad("malformed normal");
      file_normals.push_back(n.normalized());
    } else if (key == "f") {
      std::vector<std::uint32_t> face;
      std::string corner;
      while (ss >> corner) {
        long vi = 0, ti = 0, ni = 0;
        const auto s1 = corner.find('/');
        try {
          vi = std::stol(corner.substr(0, s1));
          if (s1 == std::string::npos) throw bad("face corner without texture coordinate");
          const auto s2 = corner.find('/', s1 + 1);
          const std::string t = corner.substr(s1 + 1, s2 == std::string::npos ? std::string::npos : s2 - s1 - 1);
          if (t.empty()) throw bad("face corner without texture coordinate");
          ti = std::stol(t);
          if (s2 != std::string::npos && s2 + 1 < corner.size()) ni = std::stol(corner.substr(s2 + 1));
        } catch (const std::logic_error&) {
          throw bad("malformed face corner '" + corner + "'");
        }
        vi = resolve(vi, positions.size());
        ti = resolve(ti, texcoords.size());
        if (ni != 0) ni = resolve(ni, file_normals.size()) + 1;
        if (ni == 0) any_normals = false;
        if (vi < 0 || static_cast<std::size_t>(vi) >= positions.size() || ti < 0 ||
            static_cast<std::size_t>(ti) >= texcoords.size() || ni < 0 ||
            static_cast<std::size_t>(ni) > file_normals.size())
          throw bad("face index out of range");
        const auto key3 = std::make_tuple(vi, ti, ni);
        auto it = corner_index.find(key3);
        if (it == corner_index.end()) {
          const auto idx = static_cast<std::uint32_t>(m.vertices.size());
          m.vertices.push_back(positions[static_cast<std::size_t>(vi)]);
          m.uvs.push_back(texcoords[static_cast<std::size_t>(ti)]);
          m.normals.push_back(ni > 0 ? file_normals[static_cast<std::size_t>(ni - 1)] : Vec3(0, 0, 1));
          it = corner_index.emplace(key3, idx).first;
        }
        face.push_back(it->second);
      }
      if (face.size() < 3) throw bad("face with fewer than 3 corners");
      for (std::size_t k = 1; k + 1 < face.size(); ++k) m.triangles.push_back({face[0], face[k], face[k + 1]});
    }
  }
  if (!any_normals) m.normals = compute_vertex_normals(m.vertices, m.triangles);
  m.validate();
  return m;
}

inline void save_obj(const Mesh& m, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  detail::require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  out.precision(17);
  for (const auto& v : m.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : m.uvs) out << "vt " << t.x() << ' ' << t.y() << '\n';
  for (const auto& n : m.normals) out << "vn " << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
  for (const auto& t : m.triangles) {
    out << 'f';
    for (auto idx : t) out << ' ' << idx + 1 << '/' << idx + 1 << '/' << idx + 1;
    out << '\n';
  }
}

}  // namespace defectsim
