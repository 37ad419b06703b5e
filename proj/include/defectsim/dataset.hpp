#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "defectsim/annotation.hpp"
#include "defectsim/defect.hpp"
#include "defectsim/error.hpp"
#include "defectsim/hash.hpp"
#include "defectsim/image_io.hpp"
#include "defectsim/mesh.hpp"
#include "defectsim/parallel.hpp"
#include "defectsim/render.hpp"
#include "defectsim/scene_io.hpp"
#include "defectsim/texture_synthesis.hpp"

namespace defectsim {

/// Camera on a sphere around the part centre.
struct PoseRanges {
  Range<double> azimuth_deg{0.0, 360.0};
  Range<double> elevation_deg{55.0, 90.0};  // 90 = straight down
  Range<double> distance_mm{140.0, 170.0};
};

struct LightRanges {
  Range<int> count{1, 3};
  Range<double> intensity{0.5, 1.0};
  Range<double> azimuth_deg{0.0, 360.0};
  Range<double> elevation_deg{35.0, 85.0};
};

/// Fixed scene settings plus the material knobs that are randomized.
struct SceneTemplate {
  double plate_width_mm = 40.0;
  double plate_height_mm = 40.0;
  int plate_segments = 40;
  std::string mesh_path;  // OBJ; empty means the generated plate
  double uv_per_mm = 0.0;  // 0 derives 1 / plate_width_mm
  int image_width = 256;
  int image_height = 256;
  double vfov_deg = 20.0;
  double background = 0.0;
  Range<double> albedo{0.5, 0.8};
  Range<double> bump_strength{0.5, 1.0};
  Range<double> specular_strength{0.0, 0.2};
  double specular_exponent = 32.0;
  Range<double> displacement_scale{1.0, 1.0};

  double effective_uv_per_mm() const { return uv_per_mm > 0.0 ? uv_per_mm : 1.0 / plate_width_mm; }
};

/// Where textures come from: ready-made normal maps, or a patch dictionary
/// plus seed patches from which a fresh texture is grown per image.
struct TextureSources {
  std::vector<std::string> textures;
  std::string dictionary;
  std::vector<std::string> seeds;
  int synth_size = 256;
  int overlap = 4;
  int top_k = 3;
};

struct RandomizationConfig {
  int n_images = 10;
  std::uint64_t master_seed = 1;
  Range<int> defects_per_image{1, 3};
  DefectParamRanges defect_param_ranges{};
  PoseRanges camera_pose_ranges{};
  LightRanges light_ranges{};
  TextureSources texture_seeds{};
  double healthy_fraction = 0.0;
  SceneTemplate scene{};
  int max_attempts = 10;  // re-draws of an image whose defects all end up invisible

  void validate() const {
    auto check = [](bool ok, const std::string& what) { detail::require(ok, ErrorCode::InvalidConfig, what); };
    check(n_images >= 1, "n_images must be >= 1");
    check(defects_per_image.min >= 1 && defects_per_image.min <= defects_per_image.max,
          "defects_per_image needs 1 <= min <= max");
    check(healthy_fraction >= 0.0 && healthy_fraction < 1.0, "healthy_fraction must lie in [0,1)");
    check(camera_pose_ranges.elevation_deg.min > 0.0 && camera_pose_ranges.elevation_deg.max <= 90.0 &&
              camera_pose_ranges.elevation_deg.min <= camera_pose_ranges.elevation_deg.max,
          "camera elevation must lie in (0, 90]");
    check(camera_pose_ranges.distance_mm.min > 0.0 &&
              camera_pose_ranges.distance_mm.min <= camera_pose_ranges.distance_mm.max,
          "camera distance must be positive");
    check(camera_pose_ranges.azimuth_deg.min <= camera_pose_ranges.azimuth_deg.max, "camera azimuth range inverted");
    check(light_ranges.count.min >= 1 && light_ranges.count.min <= light_ranges.count.max,
          "light count needs 1 <= min <= max");
    check(light_ranges.intensity.min >= 0.0 && light_ranges.intensity.min <= light_ranges.intensity.max,
          "light intensity must be >= 0");
    check(light_ranges.elevation_deg.min > 0.0 && light_ranges.elevation_deg.max <= 90.0 &&
              light_ranges.elevation_deg.min <= light_ranges.elevation_deg.max,
          "light elevation must lie in (0, 90]");
    check(scene.image_width > 0 && scene.image_height > 0, "image size must be positive");
    check(scene.vfov_deg > 0.0 && scene.vfov_deg < 180.0, "vfov_deg must lie in (0, 180)");
    check(scene.plate_width_mm > 0.0 && scene.plate_height_mm > 0.0 && scene.plate_segments >= 1,
          "plate needs positive size and segments");
    check(scene.albedo.min >= 0.0 && scene.albedo.min <= scene.albedo.max, "albedo range invalid");
    check(scene.bump_strength.min >= 0.0 && scene.bump_strength.min <= scene.bump_strength.max,
          "bump_strength range invalid");
    check(scene.specular_strength.min >= 0.0 && scene.specular_strength.min <= scene.specular_strength.max,
          "specular_strength range invalid");
    check(scene.displacement_scale.min > 0.0 && scene.displacement_scale.min <= scene.displacement_scale.max,
          "displacement_scale range invalid");
    check(scene.background >= 0.0 && scene.background <= 1.0, "background must lie in [0,1]");
    check(texture_seeds.dictionary.empty() == texture_seeds.seeds.empty(),
          "a texture dictionary needs seeds and vice versa");
    check(texture_seeds.synth_size > 0 && texture_seeds.top_k >= 1 && texture_seeds.overlap >= 1,
          "texture synthesis settings invalid");
    check(max_attempts >= 1, "max_attempts must be >= 1");
    try {
      defect_param_ranges.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, e.message());
    }
  }
};

/// Files referenced by a config, loaded once and shared by every image.
struct DatasetResources {
  std::shared_ptr<const Mesh> mesh;
  std::vector<std::shared_ptr<const NormalMap>> textures;
  std::shared_ptr<const PatchDictionary> dictionary;
  std::vector<NormalMap> seeds;

  static DatasetResources load(const RandomizationConfig& cfg, const fs::path& base_dir) {
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
    DatasetResources r;
    r.mesh = cfg.scene.mesh_path.empty()
                 ? std::make_shared<Mesh>(make_plate(cfg.scene.plate_width_mm, cfg.scene.plate_height_mm,
                                                     cfg.scene.plate_segments))
                 : std::make_shared<Mesh>(load_obj(resolve(cfg.scene.mesh_path)));
    for (const auto& t : cfg.texture_seeds.textures)
      r.textures.push_back(std::make_shared<NormalMap>(load_normal_map(resolve(t))));
    if (!cfg.texture_seeds.dictionary.empty()) {
      r.dictionary = std::make_shared<PatchDictionary>(load_dictionary(resolve(cfg.texture_seeds.dictionary)));
      for (const auto& s : cfg.texture_seeds.seeds) r.seeds.push_back(load_normal_map(resolve(s)));
    }
    return r;
  }
};

/// What was drawn for one placed defect.
struct DefectRecord {
  std::uint32_t defect_id = 0;
  DefectParams params;
  std::uint64_t seed = 0;
  Vec2 uv_center = Vec2::Zero();
  double uv_scale = 0.0;
  double displacement_scale = 1.0;
};

struct RandomizedScene {
  Scene scene;
  std::vector<DefectRecord> defects;
  std::uint64_t image_seed = 0;
  nlohmann::json texture;  // provenance of the texture used
};

inline constexpr int kMaxPlacementAttempts = 100;

inline std::uint64_t image_seed(std::uint64_t master_seed, int index, int attempt) {
  const std::uint64_t base = hash_combine(master_seed, static_cast<std::uint64_t>(index));
  return attempt == 0 ? base : hash_combine(base, static_cast<std::uint64_t>(attempt));
}

namespace detail {

inline Vec3 direction_from_angles(double azimuth_deg, double elevation_deg) {
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  const double el = elevation_deg * std::numbers::pi / 180.0;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

}  // namespace detail

/// Draws every random choice of image `index` from an RNG seeded by
/// hash(master_seed, index[, attempt]). Draw order: defect count, material,
/// texture, camera, lights, then per defect its parameters, seed and placement.
inline RandomizedScene randomize_scene(const RandomizationConfig& cfg, const DatasetResources& res, int index,
                                       int attempt = 0) {
  detail::require(index >= 0 && index < cfg.n_images, ErrorCode::InvalidArgument, "image index out of range");
  RandomizedScene out;
  out.image_seed = image_seed(cfg.master_seed, index, attempt);
  Rng rng(out.image_seed);

  int defect_count = 0;
  if (cfg.healthy_fraction > 0.0 && uniform01(rng) < cfg.healthy_fraction)
    defect_count = 0;
  else
    defect_count = static_cast<int>(uniform_int(rng, cfg.defects_per_image.min, cfg.defects_per_image.max));

  Scene& s = out.scene;
  const SceneTemplate& st = cfg.scene;
  s.mesh = *res.mesh;
  s.background = st.background;
  s.material.albedo = uniform_real(rng, st.albedo.min, st.albedo.max);
  s.material.bump_strength = uniform_real(rng, st.bump_strength.min, st.bump_strength.max);
  s.material.specular_strength = uniform_real(rng, st.specular_strength.min, st.specular_strength.max);
  s.material.specular_exponent = st.specular_exponent;

  if (res.dictionary) {
    const std::size_t pick = uniform_index(rng, res.seeds.size());
    SynthesisConfig sc;
    sc.target_width = sc.target_height = cfg.texture_seeds.synth_size;
    sc.overlap = cfg.texture_seeds.overlap;
    sc.top_k = std::min<int>(cfg.texture_seeds.top_k, static_cast<int>(res.dictionary->size()));
    sc.rng_seed = rng();
    s.material.texture_normals = std::make_shared<NormalMap>(synthesize(res.seeds[pick], *res.dictionary, sc).texture);
    out.texture = {{"seed_index", pick}, {"rng_seed", sc.rng_seed}};
    if (pick < cfg.texture_seeds.seeds.size()) out.texture["seed_patch"] = cfg.texture_seeds.seeds[pick];
  } else if (!res.textures.empty()) {
    const std::size_t pick = uniform_index(rng, res.textures.size());
    s.material.texture_normals = res.textures[pick];
    out.texture = {{"texture_index", pick}};
    // Resources built in memory carry no file names.
    if (pick < cfg.texture_seeds.textures.size()) out.texture["texture"] = cfg.texture_seeds.textures[pick];
  } else {
    out.texture = nullptr;
  }

  const PoseRanges& pose = cfg.camera_pose_ranges;
  const double az = uniform_real(rng, pose.azimuth_deg.min, pose.azimuth_deg.max);
  const double el = uniform_real(rng, pose.elevation_deg.min, pose.elevation_deg.max);
  const double dist = uniform_real(rng, pose.distance_mm.min, pose.distance_mm.max);
  s.camera.look_at = Vec3::Zero();
  s.camera.position = dist * detail::direction_from_angles(az, el);
  // Image "up" points away from the camera along the ground; never parallel to the view ray for el > 0.
  const double azr = az * std::numbers::pi / 180.0;
  s.camera.up = Vec3(-std::cos(azr), -std::sin(azr), 0.0);
  s.camera.vfov_deg = st.vfov_deg;
  s.camera.width = st.image_width;
  s.camera.height = st.image_height;

  const LightRanges& lr = cfg.light_ranges;
  const int light_count = static_cast<int>(uniform_int(rng, lr.count.min, lr.count.max));
  for (int l = 0; l < light_count; ++l) {
    DirectionalLight light;
    const double laz = uniform_real(rng, lr.azimuth_deg.min, lr.azimuth_deg.max);
    const double lel = uniform_real(rng, lr.elevation_deg.min, lr.elevation_deg.max);
    light.direction = detail::direction_from_angles(laz, lel).normalized();
    light.intensity = uniform_real(rng, lr.intensity.min, lr.intensity.max);
    s.lights.push_back(light);
  }

  const double uv_per_mm = st.effective_uv_per_mm();
  for (int d = 0; d < defect_count; ++d) {
    DefectRecord rec;
    rec.defect_id = static_cast<std::uint32_t>(d + 1);
    rec.params = sample_params(cfg.defect_param_ranges, rng);
    rec.seed = rng();
    rec.uv_scale = uv_per_mm;
    rec.displacement_scale = uniform_real(rng, st.displacement_scale.min, st.displacement_scale.max);
    auto instance = std::make_shared<const DefectInstance>(generate_defect(rec.params, rec.seed));

    DefectPlacement p;
    p.instance = instance;
    p.uv_scale = rec.uv_scale;
    p.displacement_scale = rec.displacement_scale;
    p.defect_id = rec.defect_id;
    const double half = p.uv_half_extent();
    bool placed = false;
    for (int attempt_no = 0; attempt_no < kMaxPlacementAttempts && !placed; ++attempt_no) {
      const double u = uniform_real(rng, half, 1.0 - half);
      const double v = uniform_real(rng, half, 1.0 - half);
      if (half > 0.5) continue;
      p.uv_center = Vec2(u, v);
      placed = true;
      for (const auto& other : s.placements) {
        const double oh = other.uv_half_extent();
        if (std::abs(other.uv_center.x() - u) < half + oh && std::abs(other.uv_center.y() - v) < half + oh) {
          placed = false;
          break;
        }
      }
    }
    detail::require(placed, ErrorCode::PlacementFailed,
                    "image " + std::to_string(index) + ": defect " + std::to_string(d + 1) +
                        " footprint cannot be packed without overlap");
    rec.uv_center = p.uv_center;
    s.placements.push_back(std::move(p));
    out.defects.push_back(rec);
  }
  return out;
}

struct ManifestRecord {
  int index = 0;
  std::string image;
  std::string mask;
  int width = 0;
  int height = 0;
  std::vector<BoundingBox> boxes;
  nlohmann::json defects = nlohmann::json::array();
  nlohmann::json camera;
  nlohmann::json lights = nlohmann::json::array();
  nlohmann::json material;
  nlohmann::json texture;
  std::string image_seed;
  int attempt = 0;
  std::string scene_hash;
  std::string config_hash;
  std::string split = "unassigned";
};

inline void to_json(nlohmann::json& j, const ManifestRecord& r) {
  j = {{"index", r.index},           {"image", r.image},       {"mask", r.mask},
       {"width", r.width},           {"height", r.height},     {"boxes", r.boxes},
       {"defects", r.defects},       {"camera", r.camera},     {"lights", r.lights},
       {"material", r.material},     {"texture", r.texture},   {"image_seed", r.image_seed},
       {"attempt", r.attempt},       {"scene_hash", r.scene_hash}, {"config_hash", r.config_hash},
       {"split", r.split}};
}

inline void from_json(const nlohmann::json& j, ManifestRecord& r) {
  r.index = j.at("index").get<int>();
  r.image = j.at("image").get<std::string>();
  r.mask = j.at("mask").get<std::string>();
  r.width = j.value("width", 0);
  r.height = j.value("height", 0);
  r.boxes = j.at("boxes").get<std::vector<BoundingBox>>();
  r.defects = j.value("defects", nlohmann::json::array());
  r.camera = j.value("camera", nlohmann::json());
  r.lights = j.value("lights", nlohmann::json::array());
  r.material = j.value("material", nlohmann::json());
  r.texture = j.value("texture", nlohmann::json());
  r.image_seed = j.value("image_seed", std::string());
  r.attempt = j.value("attempt", 0);
  r.scene_hash = j.value("scene_hash", std::string());
  r.config_hash = j.value("config_hash", std::string());
  r.split = j.value("split", std::string("unassigned"));
}

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::string config_hash;
};

/// One JSON object per line, ordered by index.
inline void save_manifest(const DatasetManifest& m, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  detail::require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& r : m.records) out << nlohmann::json(r).dump() << '\n';
}

inline DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  detail::require(static_cast<bool>(in), ErrorCode::FileNotFound, path.string());
  DatasetManifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.records.push_back(nlohmann::json::parse(line).get<ManifestRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::UnsupportedFormat, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!m.records.empty()) m.config_hash = m.records.front().config_hash;
  return m;
}

inline nlohmann::json randomization_config_json(const RandomizationConfig& cfg);

inline std::string config_hash(const RandomizationConfig& cfg) {
  Fnv1a h;
  h.update(randomization_config_json(cfg).dump());
  return hex64(h.digest());
}

namespace detail {

inline nlohmann::json material_json(const Material& m) {
  return {{"albedo", m.albedo},
          {"bump_strength", m.bump_strength},
          {"specular_strength", m.specular_strength},
          {"specular_exponent", m.specular_exponent}};
}

inline nlohmann::json defects_json(const std::vector<DefectRecord>& defects) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : defects)
    out.push_back({{"defect_id", d.defect_id},
                   {"params", d.params},
                   {"seed", d.seed},
                   {"uv_center", vec_json(d.uv_center)},
                   {"uv_scale", d.uv_scale},
                   {"displacement_scale", d.displacement_scale}});
  return out;
}

}  // namespace detail

/// Renders image `index`, re-drawing (attempt 1, 2, ...) while a defective
/// image shows no defect pixels.
inline ManifestRecord generate_record(const RandomizationConfig& cfg, const DatasetResources& res, int index,
                                      const fs::path& out_dir, const std::string& cfg_hash) {
  char stem[32];
  std::snprintf(stem, sizeof stem, "%06d", index);
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    RandomizedScene rs;
    RenderOutput ro;
    try {
      rs = randomize_scene(cfg, res, index, attempt);
      ro = render(rs.scene);
    } catch (const Error& e) {
      throw Error(e.code(), "image " + std::to_string(index) + ": " + e.message());
    }
    const auto boxes = mask_components(ro.mask);
    if (!rs.defects.empty() && boxes.empty()) continue;

    ManifestRecord r;
    r.index = index;
    r.image = std::string("images/img_") + stem + ".png";
    r.mask = std::string("masks/mask_") + stem + ".png";
    save_image(ro.image, out_dir / r.image, 8);
    save_mask(ro.mask, out_dir / r.mask);
    r.width = ro.image.width();
    r.height = ro.image.height();
    r.boxes = boxes;
    r.defects = detail::defects_json(rs.defects);
    r.camera = rs.scene.camera;
    r.lights = rs.scene.lights;
    r.material = detail::material_json(rs.scene.material);
    r.texture = rs.texture;
    r.image_seed = hex64(rs.image_seed);
    r.attempt = attempt;
    r.scene_hash = hex64(ro.scene_hash);
    r.config_hash = cfg_hash;
    return r;
  }
  throw Error(ErrorCode::PlacementFailed, "image " + std::to_string(index) + ": no visible defect after " +
                                              std::to_string(cfg.max_attempts) + " attempts");
}

/// Renders all n_images into out_dir/{images,masks} and writes
/// out_dir/manifest.jsonl. Images are generated in parallel; the manifest is
/// assembled in index order.
inline DatasetManifest generate_dataset(const RandomizationConfig& cfg, const DatasetResources& res,
                                        const fs::path& out_dir) {
  cfg.validate();
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");
  DatasetManifest m;
  m.config_hash = config_hash(cfg);
  m.records.resize(static_cast<std::size_t>(cfg.n_images));
  parallel_for(m.records.size(), [&](std::size_t i) {
    m.records[i] = generate_record(cfg, res, static_cast<int>(i), out_dir, m.config_hash);
  });
  save_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

inline std::size_t round_half_even(double v) {
  const double f = std::floor(v);
  const double diff = v - f;
  if (diff > 0.5) return static_cast<std::size_t>(f) + 1;
  if (diff < 0.5) return static_cast<std::size_t>(f);
  const auto fi = static_cast<std::size_t>(f);
  return fi % 2 == 0 ? fi : fi + 1;
}

/// Tags round(n * test_fraction) records (half-to-even) as "test" via a
/// seeded Fisher-Yates shuffle; the rest become "train".
inline DatasetManifest split(DatasetManifest m, double test_fraction, std::uint64_t seed) {
  detail::require(!m.records.empty(), ErrorCode::EmptyManifest, "manifest has no records");
  detail::require(test_fraction > 0.0 && test_fraction < 1.0, ErrorCode::InvalidArgument,
                  "test fraction must lie in (0,1)");
  const std::size_t n = m.records.size();
  const std::size_t n_test = round_half_even(static_cast<double>(n) * test_fraction);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
  for (auto& r : m.records) r.split = "train";
  for (std::size_t i = 0; i < n_test; ++i) m.records[order[i]].split = "test";
  return m;
}

// Config JSON mapping

template <typename T>
void read_range(const nlohmann::json& j, const char* key, Range<T>& r) {
  if (j.contains(key)) r = j.at(key).get<Range<T>>();
}

inline void from_json(const nlohmann::json& j, PoseRanges& p) {
  read_range(j, "azimuth_deg", p.azimuth_deg);
  read_range(j, "elevation_deg", p.elevation_deg);
  read_range(j, "distance_mm", p.distance_mm);
}

inline void to_json(nlohmann::json& j, const PoseRanges& p) {
  j = {{"azimuth_deg", p.azimuth_deg}, {"elevation_deg", p.elevation_deg}, {"distance_mm", p.distance_mm}};
}

inline void from_json(const nlohmann::json& j, LightRanges& l) {
  read_range(j, "count", l.count);
  read_range(j, "intensity", l.intensity);
  read_range(j, "azimuth_deg", l.azimuth_deg);
  read_range(j, "elevation_deg", l.elevation_deg);
}

inline void to_json(nlohmann::json& j, const LightRanges& l) {
  j = {{"count", l.count},
       {"intensity", l.intensity},
       {"azimuth_deg", l.azimuth_deg},
       {"elevation_deg", l.elevation_deg}};
}

inline void from_json(const nlohmann::json& j, SceneTemplate& s) {
  s.plate_width_mm = j.value("plate_width_mm", s.plate_width_mm);
  s.plate_height_mm = j.value("plate_height_mm", s.plate_height_mm);
  s.plate_segments = j.value("plate_segments", s.plate_segments);
  s.mesh_path = j.value("mesh", s.mesh_path);
  s.uv_per_mm = j.value("uv_per_mm", s.uv_per_mm);
  s.image_width = j.value("image_width", s.image_width);
  s.image_height = j.value("image_height", s.image_height);
  s.vfov_deg = j.value("vfov_deg", s.vfov_deg);
  s.background = j.value("background", s.background);
  read_range(j, "albedo", s.albedo);
  read_range(j, "bump_strength", s.bump_strength);
  read_range(j, "specular_strength", s.specular_strength);
  s.specular_exponent = j.value("specular_exponent", s.specular_exponent);
  read_range(j, "displacement_scale", s.displacement_scale);
}

inline void to_json(nlohmann::json& j, const SceneTemplate& s) {
  j = {{"plate_width_mm", s.plate_width_mm},
       {"plate_height_mm", s.plate_height_mm},
       {"plate_segments", s.plate_segments},
       {"mesh", s.mesh_path},
       {"uv_per_mm", s.uv_per_mm},
       {"image_width", s.image_width},
       {"image_height", s.image_height},
       {"vfov_deg", s.vfov_deg},
       {"background", s.background},
       {"albedo", s.albedo},
       {"bump_strength", s.bump_strength},
       {"specular_strength", s.specular_strength},
       {"specular_exponent", s.specular_exponent},
       {"displacement_scale", s.displacement_scale}};
}

inline void from_json(const nlohmann::json& j, TextureSources& t) {
  t.textures = j.value("textures", t.textures);
  t.dictionary = j.value("dictionary", t.dictionary);
  t.seeds = j.value("seeds", t.seeds);
  t.synth_size = j.value("synth_size", t.synth_size);
  t.overlap = j.value("overlap", t.overlap);
  t.top_k = j.value("top_k", t.top_k);
}

inline void to_json(nlohmann::json& j, const TextureSources& t) {
  j = {{"textures", t.textures}, {"dictionary", t.dictionary}, {"seeds", t.seeds},
       {"synth_size", t.synth_size}, {"overlap", t.overlap},   {"top_k", t.top_k}};
}

inline nlohmann::json randomization_config_json(const RandomizationConfig& cfg) {
  return {{"n_images", cfg.n_images},
          {"master_seed", cfg.master_seed},
          {"defects_per_image", cfg.defects_per_image},
          {"defect_param_ranges", cfg.defect_param_ranges},
          {"camera_pose_ranges", cfg.camera_pose_ranges},
          {"light_ranges", cfg.light_ranges},
          {"texture_seeds", cfg.texture_seeds},
          {"healthy_fraction", cfg.healthy_fraction},
          {"scene", cfg.scene},
          {"max_attempts", cfg.max_attempts}};
}

inline RandomizationConfig randomization_config_from_json(const nlohmann::json& j) {
  RandomizationConfig cfg;
  try {
    cfg.n_images = j.value("n_images", cfg.n_images);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    read_range(j, "defects_per_image", cfg.defects_per_image);
    if (j.contains("defect_param_ranges")) cfg.defect_param_ranges = j.at("defect_param_ranges").get<DefectParamRanges>();
    if (j.contains("camera_pose_ranges")) cfg.camera_pose_ranges = j.at("camera_pose_ranges").get<PoseRanges>();
    if (j.contains("light_ranges")) cfg.light_ranges = j.at("light_ranges").get<LightRanges>();
    if (j.contains("texture_seeds")) cfg.texture_seeds = j.at("texture_seeds").get<TextureSources>();
    cfg.healthy_fraction = j.value("healthy_fraction", cfg.healthy_fraction);
    if (j.contains("scene")) cfg.scene = j.at("scene").get<SceneTemplate>();
    cfg.max_attempts = j.value("max_attempts", cfg.max_attempts);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.message());
  }
  return cfg;
}

}  // namespace defectsim
