#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "json.hpp"

#include "defectsim/defect.hpp"
#include "defectsim/error.hpp"
#include "defectsim/image_io.hpp"
#include "defectsim/mesh.hpp"
#include "defectsim/render.hpp"

namespace defectsim {

inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }
inline nlohmann::json vec_json(const Vec2& v) { return nlohmann::json::array({v.x(), v.y()}); }

inline Vec3 vec3_from(const nlohmann::json& j) {
  detail::require(j.is_array() && j.size() == 3, ErrorCode::InvalidScene, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Vec2 vec2_from(const nlohmann::json& j) {
  detail::require(j.is_array() && j.size() == 2, ErrorCode::InvalidScene, "expected a 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline void to_json(nlohmann::json& j, const Camera& c) {
  j = {{"position", vec_json(c.position)},
       {"look_at", vec_json(c.look_at)},
       {"up", vec_json(c.up)},
       {"vfov_deg", c.vfov_deg},
       {"width", c.width},
       {"height", c.height}};
}

inline void from_json(const nlohmann::json& j, Camera& c) {
  c = Camera{};
  if (j.contains("position")) c.position = vec3_from(j.at("position"));
  if (j.contains("look_at")) c.look_at = vec3_from(j.at("look_at"));
  if (j.contains("up")) c.up = vec3_from(j.at("up"));
  c.vfov_deg = j.value("vfov_deg", c.vfov_deg);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
}

/// Directions are normalized on read.
inline void to_json(nlohmann::json& j, const DirectionalLight& l) {
  j = {{"direction", vec_json(l.direction)}, {"intensity", l.intensity}};
}

inline void from_json(const nlohmann::json& j, DirectionalLight& l) {
  const Vec3 d = vec3_from(j.at("direction"));
  detail::require(d.norm() > 0.0, ErrorCode::InvalidScene, "light direction is zero");
  l.direction = d.normalized();
  l.intensity = j.value("intensity", 1.0);
}

/// Defect instance from a saved height map (16-bit PNG + sidecar).
inline std::shared_ptr<const DefectInstance> defect_from_height_map(const fs::path& path) {
  const LoadedHeightMap loaded = load_height_map(path);
  detail::require(loaded.height.width() == loaded.height.height(), ErrorCode::InvalidScene,
                  "defect height maps must be square");
  detail::require(loaded.scale.pixels_per_mm > 0.0, ErrorCode::InvalidScene,
                  path.string() + " sidecar lacks pixels_per_mm");
  auto inst = std::make_shared<DefectInstance>();
  inst->height = loaded.height;
  std::vector<std::uint32_t> labels(loaded.height.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i] = loaded.height[i] < -DefectInstance::kMaskEpsilon ? 1u : 0u;
  inst->mask = MaskMap(loaded.height.width(), loaded.height.height(), std::move(labels));
  inst->params.resolution = loaded.scale.pixels_per_mm;
  return inst;
}

/// Scene description; relative paths resolve against `base_dir`.
///
/// {
///   "mesh": {"obj": "part.obj"} | {"plate": {"width_mm": 40, "height_mm": 40, "segments": 40}},
///   "material": {"albedo": 0.7, "albedo_map": "a.png", "texture_normals": "n.png",
///                "bump_strength": 1, "specular_strength": 0, "specular_exponent": 32},
///   "defects": [{"params": {...}, "seed": 7} | {"height_map": "d.png"},
///               with "uv_center": [u, v], "uv_scale": 0.025, "displacement_scale": 1, "defect_id": 1],
///   "lights": [{"direction": [x, y, z], "intensity": 1}],
///   "camera": {"position": [...], "look_at": [...], "up": [...], "vfov_deg": 30, "width": 256, "height": 256},
///   "background": 0
/// }
inline Scene scene_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
  try {
    Scene s;
    const auto& mesh = j.at("mesh");
    if (mesh.contains("obj")) {
      s.mesh = load_obj(resolve(mesh.at("obj").get<std::string>()));
    } else {
      const auto& plate = mesh.at("plate");
      s.mesh = make_plate(plate.value("width_mm", 40.0), plate.value("height_mm", 40.0), plate.value("segments", 40));
    }

    if (j.contains("material")) {
      const auto& m = j.at("material");
      s.material.albedo = m.value("albedo", s.material.albedo);
      s.material.bump_strength = m.value("bump_strength", s.material.bump_strength);
      s.material.specular_strength = m.value("specular_strength", s.material.specular_strength);
      s.material.specular_exponent = m.value("specular_exponent", s.material.specular_exponent);
      if (m.contains("albedo_map")) {
        const GrayImage img = load_image(resolve(m.at("albedo_map").get<std::string>()));
        s.material.albedo_map = std::make_shared<AlbedoMap>(img.width(), img.height(),
                                                            std::vector<double>(img.data().begin(), img.data().end()));
      }
      if (m.contains("texture_normals"))
        s.material.texture_normals =
            std::make_shared<NormalMap>(load_normal_map(resolve(m.at("texture_normals").get<std::string>())));
    }

    std::uint32_t next_id = 1;
    for (const auto& d : j.value("defects", nlohmann::json::array())) {
      DefectPlacement p;
      if (d.contains("height_map")) {
        p.instance = defect_from_height_map(resolve(d.at("height_map").get<std::string>()));
      } else {
        const auto params = d.at("params").get<DefectParams>();
        p.instance = std::make_shared<DefectInstance>(generate_defect(params, d.value("seed", std::uint64_t{0})));
      }
      if (d.contains("uv_center")) p.uv_center = vec2_from(d.at("uv_center"));
      p.uv_scale = d.value("uv_scale", p.uv_scale);
      p.displacement_scale = d.value("displacement_scale", p.displacement_scale);
      p.defect_id = d.value("defect_id", next_id);
      next_id = p.defect_id + 1;
      s.placements.push_back(std::move(p));
    }

    for (const auto& l : j.value("lights", nlohmann::json::array())) s.lights.push_back(l.get<DirectionalLight>());
    if (j.contains("camera")) s.camera = j.at("camera").get<Camera>();
    s.background = j.value("background", 0.0);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidScene, e.what());
  }
}

inline Scene load_scene(const fs::path& path) {
  std::ifstream in(path);
  detail::require(static_cast<bool>(in), ErrorCode::FileNotFound, path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidScene, path.string() + ": " + e.what());
  }
  return scene_from_json(j, path.parent_path());
}

}  // namespace defectsim
