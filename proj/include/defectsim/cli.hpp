#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "defectsim/annotation.hpp"
#include "defectsim/dataset.hpp"
#include "defectsim/defect.hpp"
#include "defectsim/error.hpp"
#include "defectsim/image_io.hpp"
#include "defectsim/noise.hpp"
#include "defectsim/parallel.hpp"
#include "defectsim/photometric_stereo.hpp"
#include "defectsim/render.hpp"
#include "defectsim/scene_io.hpp"
#include "defectsim/texture_synthesis.hpp"

namespace defectsim::cli {

enum ExitCode : int { kOk = 0, kStageError = 1, kUsageError = 2, kConfigError = 3 };

/// Thrown for malformed invocations that CLI11 cannot catch itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a config file is unreadable or fails validation.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Settings for texture synthesis from a config file.
struct SynthesisSection {
  int patch_size = 16;
  int stride = 4;
  int overlap = 4;
  int top_k = 3;
  int target_width = 1024;
  int target_height = 1024;
  std::uint64_t rng_seed = 0;
};

/// Whole-pipeline configuration. Every section is optional.
struct PipelineConfig {
  std::uint64_t master_seed = 1;
  SolverConfig solver{};
  SynthesisSection synthesis{};
  RandomizationConfig randomization{};
  fs::path base_dir;

  fs::path resolve(const std::string& p) const { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; }

  /// Section checks plus existence of every referenced path.
  void validate() const {
    try {
      solver.validate(8);
      randomization.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError(what);
    };
    need(synthesis.patch_size >= 2 && synthesis.stride >= 1, "synthesis: patch_size >= 2 and stride >= 1 required");
    need(synthesis.overlap >= 1 && synthesis.overlap < synthesis.patch_size,
         "synthesis: overlap must lie in [1, patch_size)");
    need(synthesis.top_k >= 1 && synthesis.target_width > 0 && synthesis.target_height > 0,
         "synthesis: top_k and target size must be positive");
    const auto& tex = randomization.texture_seeds;
    auto exists = [&](const std::string& p) { need(fs::exists(resolve(p)), "path not found: " + resolve(p).string()); };
    for (const auto& t : tex.textures) exists(t);
    for (const auto& s : tex.seeds) exists(s);
    if (!tex.dictionary.empty()) exists((fs::path(tex.dictionary) / "index.json").string());
    if (!randomization.scene.mesh_path.empty()) exists(randomization.scene.mesh_path);
  }
};

inline nlohmann::json pipeline_schema() {
  using nlohmann::json;
  const json range = {{"description", "[min, max], {\"min\": a, \"max\": b} or a single value"}};
  const json number = {{"type", "number"}};
  const json integer = {{"type", "integer"}};
  const json str = {{"type", "string"}};
  const json str_list = {{"type", "array"}, {"items", str}};
  auto object = [](json props) {
    return json{{"type", "object"}, {"properties", std::move(props)}, {"additionalProperties", false}};
  };
  const json noise_ranges = object({{"kinds", {{"type", "array"}, {"items", {{"enum", {"fractal", "turbulence"}}}}}},
                                    {"octaves", range},
                                    {"base_frequency", range},
                                    {"lacunarity", range},
                                    {"gain", range}});
  const json defect_ranges = object({{"radius_mm", range},
                                     {"depth_mm", range},
                                     {"edge_noise", noise_ranges},
                                     {"edge_amplitude", range},
                                     {"floor_noise", noise_ranges},
                                     {"floor_amplitude", range},
                                     {"profile_power", range},
                                     {"resolution", range}});
  const json scene = object({{"plate_width_mm", number},   {"plate_height_mm", number}, {"plate_segments", integer},
                             {"mesh", str},                {"uv_per_mm", number},       {"image_width", integer},
                             {"image_height", integer},    {"vfov_deg", number},        {"background", number},
                             {"albedo", range},            {"bump_strength", range},    {"specular_strength", range},
                             {"specular_exponent", number}, {"displacement_scale", range}});
  const json textures = object({{"textures", str_list},
                                {"dictionary", str},
                                {"seeds", str_list},
                                {"synth_size", integer},
                                {"overlap", integer},
                                {"top_k", integer}});
  const json randomization =
      object({{"n_images", integer},
              {"master_seed", integer},
              {"defects_per_image", range},
              {"defect_param_ranges", defect_ranges},
              {"camera_pose_ranges", object({{"azimuth_deg", range}, {"elevation_deg", range}, {"distance_mm", range}})},
              {"light_ranges", object({{"count", range},
                                       {"intensity", range},
                                       {"azimuth_deg", range},
                                       {"elevation_deg", range}})},
              {"texture_seeds", textures},
              {"healthy_fraction", number},
              {"scene", scene},
              {"max_attempts", integer}});
  return object({{"master_seed", integer},
                 {"solver", object({{"shadow_threshold", number},
                                    {"highlight_threshold", number},
                                    {"min_valid_lights", integer},
                                    {"max_condition", number}})},
                 {"synthesis", object({{"patch_size", integer},
                                       {"stride", integer},
                                       {"overlap", integer},
                                       {"top_k", integer},
                                       {"target_width", integer},
                                       {"target_height", integer},
                                       {"rng_seed", integer}})},
                 {"defect_ranges", defect_ranges},
                 {"scene", scene},
                 {"randomization", randomization},
                 {"paths", textures}});
}

/// Top-level "scene", "defect_ranges" and "paths" override the same
/// sections inside "randomization"; a bare randomization object is accepted too.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  PipelineConfig cfg;
  cfg.base_dir = base_dir;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    const bool bare = !j.contains("randomization") && (j.contains("n_images") || j.contains("camera_pose_ranges"));
    cfg.randomization = randomization_config_from_json(bare ? j : j.value("randomization", nlohmann::json::object()));
    cfg.master_seed = j.value("master_seed", cfg.randomization.master_seed);
    cfg.randomization.master_seed = cfg.master_seed;
    if (j.contains("scene")) cfg.randomization.scene = j.at("scene").get<SceneTemplate>();
    if (j.contains("defect_ranges")) cfg.randomization.defect_param_ranges = j.at("defect_ranges").get<DefectParamRanges>();
    if (j.contains("paths")) cfg.randomization.texture_seeds = j.at("paths").get<TextureSources>();
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      cfg.solver.shadow_threshold = s.value("shadow_threshold", cfg.solver.shadow_threshold);
      cfg.solver.highlight_threshold = s.value("highlight_threshold", cfg.solver.highlight_threshold);
      cfg.solver.min_valid_lights = s.value("min_valid_lights", cfg.solver.min_valid_lights);
      cfg.solver.max_condition = s.value("max_condition", cfg.solver.max_condition);
    }
    if (j.contains("synthesis")) {
      const auto& s = j.at("synthesis");
      auto& o = cfg.synthesis;
      o.patch_size = s.value("patch_size", o.patch_size);
      o.stride = s.value("stride", o.stride);
      o.overlap = s.value("overlap", o.overlap);
      o.top_k = s.value("top_k", o.top_k);
      o.target_width = s.value("target_width", o.target_width);
      o.target_height = s.value("target_height", o.target_height);
      o.rng_seed = s.value("rng_seed", o.rng_seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j, path.parent_path());
}

/// "octagon:<slant>:<count>" or "octagon" (45 degrees, 8 lights).
inline LightRig parse_rig(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.empty() || parts[0] != "octagon" || parts.size() > 3) throw UsageError("unknown rig '" + spec + "'");
  try {
    const double slant = parts.size() > 1 ? std::stod(parts[1]) : 45.0;
    const int count = parts.size() > 2 ? std::stoi(parts[2]) : 8;
    return octagon_rig(slant, count);
  } catch (const std::logic_error&) {
    throw UsageError("malformed rig '" + spec + "'");
  }
}

/// "WxH" or a single side length.
inline std::pair<int, int> parse_size(const std::string& s) {
  try {
    const auto x = s.find_first_of("xX");
    if (x == std::string::npos) {
      const int n = std::stoi(s);
      return {n, n};
    }
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
  } catch (const std::logic_error&) {
    throw UsageError("malformed size '" + s + "', expected WxH");
  }
}

/// Collects written paths and summary fields; prints them at the end.
class Report {
 public:
  explicit Report(std::string command) : summary_{{"command", std::move(command)}} {}

  void wrote(const fs::path& p) { outputs_.push_back(p.string()); }
  nlohmann::json& summary() { return summary_; }

  void print(std::ostream& out, bool as_json) const {
    if (as_json) {
      nlohmann::json j = summary_;
      j["outputs"] = outputs_;
      out << j.dump() << '\n';
    } else {
      for (const auto& p : outputs_) out << p << '\n';
    }
  }

 private:
  nlohmann::json summary_;
  std::vector<std::string> outputs_;
};

inline void write_json(const nlohmann::json& j, const fs::path& path, Report& report) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  detail::require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  report.wrote(path);
}

// Subcommand bodies

struct SolveArgs {
  std::string stack;
  std::string rig;
  std::string out;
  std::string config;
};

/// Stack manifest: {"images": [...], "lights": [[x, y, z], ...]}; --rig replaces "lights".
inline void cmd_solve_normals(const SolveArgs& a, Report& report) {
  std::ifstream in(a.stack);
  detail::require(static_cast<bool>(in), ErrorCode::FileNotFound, a.stack);
  nlohmann::json j;
  std::vector<fs::path> images;
  std::optional<LightRig> rig;
  const fs::path base = fs::path(a.stack).parent_path();
  try {
    j = nlohmann::json::parse(in);
    for (const auto& p : j.at("images")) {
      const fs::path path = p.get<std::string>();
      images.push_back(path.is_absolute() ? path : base / path);
    }
    if (a.rig.empty()) {
      std::vector<Vec3> dirs;
      for (const auto& l : j.at("lights")) dirs.push_back(vec3_from(l));
      rig.emplace(std::move(dirs));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::UnsupportedFormat, a.stack + ": " + e.what());
  }
  if (!a.rig.empty()) rig = parse_rig(a.rig);
  SolverConfig solver;
  if (!a.config.empty()) solver = load_pipeline_config(a.config).solver;

  const ImageStack stack(load_image_stack(images), *rig);
  const StereoResult r = solve_normals(stack, solver);
  const fs::path out = a.out;
  fs::create_directories(out);
  save_normal_map(r.normals, out / "normals.png");
  report.wrote(out / "normals.png");
  std::vector<double> albedo(r.albedo.data().begin(), r.albedo.data().end());
  double albedo_max = 0.0;
  for (auto& v : albedo) {
    albedo_max = std::max(albedo_max, v);
    v = std::min(v, 1.0);
  }
  save_image(GrayImage(r.albedo.width(), r.albedo.height(), std::move(albedo)), out / "albedo.png");
  report.wrote(out / "albedo.png");
  nlohmann::json summary = {{"width", r.normals.width()},
                            {"height", r.normals.height()},
                            {"valid_pixels", r.normals.valid_count()},
                            {"albedo_max", albedo_max}};
  try {
    summary["integrability"] = integrability_report(r.normals);
  } catch (const Error&) {
    summary["integrability"] = nullptr;
  }
  write_json(summary, out / "report.json", report);
  report.summary().update(summary);
}

struct BuildDictArgs {
  std::vector<std::string> maps;
  int patch = 16;
  int stride = 4;
  std::string out;
};

inline void cmd_build_dict(const BuildDictArgs& a, Report& report) {
  std::vector<NormalMap> maps;
  for (const auto& m : a.maps) maps.push_back(load_normal_map(m));
  PatchDictionary dict = build_dictionary(maps, a.patch, a.stride);
  dict.set_source_names(a.maps);
  save_dictionary(dict, a.out);
  report.wrote(fs::path(a.out) / "index.json");
  report.wrote(fs::path(a.out) / "patches");
  report.summary()["patches"] = dict.size();
}

struct SynthArgs {
  std::string seed;
  std::string dict;
  std::string size = "1024x1024";
  std::uint64_t rng = 0;
  int top_k = 3;
  int overlap = 4;
  std::string out;
  std::string log;
};

inline void cmd_synth_texture(const SynthArgs& a, Report& report) {
  const auto [w, h] = parse_size(a.size);
  const NormalMap seed = load_normal_map(a.seed);
  const PatchDictionary dict = load_dictionary(a.dict);
  SynthesisConfig cfg;
  cfg.target_width = w;
  cfg.target_height = h;
  cfg.rng_seed = a.rng;
  cfg.top_k = a.top_k;
  cfg.overlap = a.overlap;
  const SynthesisResult r = synthesize(seed, dict, cfg);
  save_normal_map(r.texture, a.out);
  report.wrote(a.out);
  if (!a.log.empty()) write_json(paste_log_json(r, cfg, dict.patch_size()), a.log, report);
  report.summary()["pastes"] = r.log.size();
}

struct DefectArgs {
  DefectParams params{};
  std::string edge_kind = "fractal";
  std::string floor_kind = "fractal";
  std::uint64_t seed = 0;
  std::string out;
  std::string mask;
  std::string ranges;
  int n = 1;
};

inline void save_defect(const DefectInstance& d, const fs::path& height_path, const fs::path& mask_path,
                        Report& report) {
  save_height_map(d.height, height_path, d.params.resolution);
  report.wrote(height_path);
  report.wrote(sidecar_path(height_path));
  if (!mask_path.empty()) {
    save_mask(d.mask, mask_path);
    report.wrote(mask_path);
  }
}

/// Single defect from flags, or a batch of n from a ranges file into the --out directory.
inline void cmd_gen_defect(DefectArgs a, Report& report) {
  if (a.ranges.empty()) {
    a.params.edge_noise.kind = noise_kind_from_string(a.edge_kind);
    a.params.floor_noise.kind = noise_kind_from_string(a.floor_kind);
    const DefectInstance d = generate_defect(a.params, a.seed);
    save_defect(d, a.out, a.mask, report);
    report.summary()["size"] = d.size();
    return;
  }
  std::ifstream in(a.ranges);
  if (!in) throw ConfigError("cannot read ranges " + a.ranges);
  DefectParamRanges ranges;
  try {
    ranges = nlohmann::json::parse(in).get<DefectParamRanges>();
    ranges.validate();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(a.ranges + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(a.ranges + ": " + e.what());
  }
  const fs::path dir = a.out;
  fs::create_directories(dir);
  // Defect i depends only on (seed, i), so batches can grow or be regenerated piecewise.
  struct Drawn {
    DefectParams params;
    std::uint64_t seed = 0;
    std::optional<DefectInstance> instance;
  };
  std::vector<Drawn> drawn(static_cast<std::size_t>(a.n));
  parallel_for(drawn.size(), [&](std::size_t i) {
    Rng rng(hash_combine(a.seed, static_cast<std::uint64_t>(i)));
    drawn[i].params = sample_params(ranges, rng);
    drawn[i].seed = rng();
    drawn[i].instance = generate_defect(drawn[i].params, drawn[i].seed);
  });
  nlohmann::json index = nlohmann::json::array();
  for (int i = 0; i < a.n; ++i) {
    const Drawn& d = drawn[static_cast<std::size_t>(i)];
    char stem[32];
    std::snprintf(stem, sizeof stem, "defect_%04d", i);
    save_defect(*d.instance, dir / (std::string(stem) + ".png"), dir / (std::string(stem) + "_mask.png"), report);
    index.push_back({{"height_map", std::string(stem) + ".png"}, {"params", d.params}, {"seed", d.seed}});
  }
  write_json(index, dir / "defects.json", report);
}

inline void cmd_render(const std::string& scene_path, const std::string& out_dir, Report& report) {
  const Scene scene = load_scene(scene_path);
  const RenderOutput r = render(scene);
  const fs::path out = out_dir;
  fs::create_directories(out);
  save_image(r.image, out / "image.png");
  report.wrote(out / "image.png");
  save_mask(r.mask, out / "mask.png");
  report.wrote(out / "mask.png");
  const auto boxes = mask_components(r.mask);
  write_json({{"scene_hash", hex64(r.scene_hash)}, {"camera", r.camera}, {"boxes", boxes}}, out / "meta.json", report);
  report.summary()["boxes"] = boxes.size();
}

inline void cmd_dataset(PipelineConfig cfg, std::optional<int> n, std::optional<std::uint64_t> seed,
                        const std::string& out, Report& report) {
  if (n) cfg.randomization.n_images = *n;
  if (seed) cfg.randomization.master_seed = cfg.master_seed = *seed;
  cfg.validate();
  const DatasetResources res = DatasetResources::load(cfg.randomization, cfg.base_dir);
  const DatasetManifest m = generate_dataset(cfg.randomization, res, out);
  for (const auto& r : m.records) {
    report.wrote(fs::path(out) / r.image);
    report.wrote(fs::path(out) / r.mask);
  }
  report.wrote(fs::path(out) / "manifest.jsonl");
  report.summary()["records"] = m.records.size();
  report.summary()["config_hash"] = m.config_hash;
}

inline void cmd_split(const std::string& manifest, double frac, std::uint64_t seed, std::string out,
                      Report& report) {
  const DatasetManifest m = split(load_manifest(manifest), frac, seed);
  if (out.empty()) {
    fs::path p = manifest;
    out = (p.parent_path() / (p.stem().string() + ".split.jsonl")).string();
  }
  save_manifest(m, out);
  report.wrote(out);
  std::size_t n_test = 0;
  for (const auto& r : m.records) n_test += r.split == "test";
  report.summary()["train"] = m.records.size() - n_test;
  report.summary()["test"] = n_test;
}

// Demo: procedural stand-ins for a scanned part surface.

namespace demo {

/// Bump normals of a fractal height field, periodic-free and seed-driven.
inline NormalMap procedural_surface(int size, std::uint64_t seed, double amplitude) {
  NoiseSpec spec;
  spec.kind = NoiseKind::Fractal;
  spec.octaves = 4;
  spec.base_frequency = 1.0 / 24.0;
  spec.seed = seed;
  std::vector<Vec3> normals(static_cast<std::size_t>(size) * size);
  auto height = [&](double x, double y) { return amplitude * fbm(x, y, spec); };
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      // Image rows grow downward, the surface v axis upward.
      const double dx = (height(x + 0.5, y) - height(x - 0.5, y));
      const double dy = -(height(x, y + 0.5) - height(x, y - 0.5));
      normals[static_cast<std::size_t>(y) * size + x] = Vec3(-dx, -dy, 1.0).normalized();
    }
  return NormalMap(size, size, std::move(normals));
}

/// Top-down, nearly orthographic view that keeps the whole image on the plate.
inline Scene stereo_scene(std::shared_ptr<const NormalMap> texture, double plate_mm, int pixels) {
  Scene s;
  s.mesh = make_plate(plate_mm, plate_mm, 1);
  s.material.albedo = 0.8;
  s.material.texture_normals = std::move(texture);
  s.material.bump_strength = 1.0;
  const double distance = 4000.0;
  s.camera.position = Vec3(0.0, 0.0, distance);
  s.camera.look_at = Vec3::Zero();
  s.camera.up = Vec3(0.0, 1.0, 0.0);
  s.camera.vfov_deg = 2.0 * std::atan(0.5 * plate_mm / distance) * 180.0 / std::numbers::pi;
  s.camera.width = s.camera.height = pixels;
  return s;
}

}  // namespace demo

struct DemoArgs {
  std::string out;
  int n = 5;
  std::uint64_t seed = 1;
  int image_size = 256;
};

/// scan -> stereo solve -> dictionary -> synthesis -> defects -> dataset.
inline void cmd_demo(const DemoArgs& a, Report& report) {
  const fs::path out = a.out;
  fs::create_directories(out);
  const int scan_size = 192;

  // 1. Photometric scan of a procedural surface.
  auto truth = std::make_shared<const NormalMap>(demo::procedural_surface(scan_size, hash_combine(a.seed, 1), 1.5));
  const LightRig rig = octagon_rig(45.0, 8);
  const ImageStack stack = render_stack_for_stereo(demo::stereo_scene(truth, 40.0, scan_size), rig);
  nlohmann::json stack_json = {{"images", nlohmann::json::array()}, {"lights", nlohmann::json::array()}};
  for (std::size_t k = 0; k < stack.count(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "scan/light_%02zu.png", k);
    save_image(stack.image(k), out / name);
    report.wrote(out / name);
    stack_json["images"].push_back(fs::path(name).filename().string());
    stack_json["lights"].push_back(vec_json(rig[k]));
  }
  write_json(stack_json, out / "scan" / "stack.json", report);
  const StereoResult scan = solve_normals(stack);
  save_normal_map(scan.normals, out / "scan" / "normals.png");
  report.wrote(out / "scan" / "normals.png");

  // 2. Patch dictionary from the recovered normals.
  const PatchDictionary dict = build_dictionary({scan.normals}, 16, 8);
  save_dictionary(dict, out / "dictionary");
  report.wrote(out / "dictionary" / "index.json");

  // 3. Seed patch cut from the scan centre; two textures grown from it.
  const int seed_side = 48;
  const int s0 = (scan_size - seed_side) / 2;
  std::vector<Vec3> seed_normals;
  std::vector<std::uint8_t> seed_valid;
  for (int y = s0; y < s0 + seed_side; ++y)
    for (int x = s0; x < s0 + seed_side; ++x) {
      seed_normals.push_back(scan.normals.at(x, y));
      seed_valid.push_back(scan.normals.valid(x, y) ? 1 : 0);
    }
  const NormalMap seed_patch(seed_side, seed_side, std::move(seed_normals), std::move(seed_valid));
  save_normal_map(seed_patch, out / "textures" / "seed.png");
  report.wrote(out / "textures" / "seed.png");
  std::vector<std::string> textures;
  for (int t = 0; t < 2; ++t) {
    SynthesisConfig sc;
    sc.target_width = sc.target_height = 256;
    sc.rng_seed = hash_combine(a.seed, 2, static_cast<std::uint64_t>(t));
    const SynthesisResult r = synthesize(seed_patch, dict, sc);
    const std::string name = "texture_" + std::to_string(t) + ".png";
    save_normal_map(r.texture, out / "textures" / name);
    report.wrote(out / "textures" / name);
    write_json(paste_log_json(r, sc, dict.patch_size()), out / "textures" / ("texture_" + std::to_string(t) + ".log.json"),
               report);
    textures.push_back((fs::path("textures") / name).string());
  }

  // 4. A few sample defects for inspection.
  Rng defect_rng(hash_combine(a.seed, 3));
  const DefectParamRanges ranges{};
  for (int i = 0; i < 3; ++i) {
    const DefectParams p = sample_params(ranges, defect_rng);
    const DefectInstance d = generate_defect(p, defect_rng());
    const std::string stem = "defects/defect_" + std::to_string(i);
    save_defect(d, out / (stem + ".png"), out / (stem + "_mask.png"), report);
  }

  // 5. Randomized dataset on the synthesized textures.
  RandomizationConfig rc;
  rc.n_images = a.n;
  rc.master_seed = a.seed;
  rc.texture_seeds.textures = textures;
  rc.scene.image_width = rc.scene.image_height = a.image_size;
  const DatasetResources res = DatasetResources::load(rc, out);
  const fs::path ds = out / "dataset";
  const DatasetManifest m = generate_dataset(rc, res, ds);
  for (const auto& r : m.records) {
    report.wrote(ds / r.image);
    report.wrote(ds / r.mask);
  }
  report.wrote(ds / "manifest.jsonl");
  write_json(randomization_config_json(rc), out / "dataset_config.json", report);
  report.summary()["records"] = m.records.size();
}

// Entry point

inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidRange:
      return kConfigError;
    default:
      return kStageError;
  }
}

inline void print_error(std::ostream& err, const std::string& code, const std::string& message, int exit_code) {
  err << nlohmann::json{{"error", {{"code", code}, {"message", message}, {"exit_code", exit_code}}}}.dump() << '\n';
}

/// Parses argv, runs one subcommand, and maps failures to exit codes:
/// 2 for usage errors, 3 for bad configs, 1 for failures inside a stage.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Synthetic surface-defect image generator", "defectsim"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  bool as_json = false;
  bool print_schema = false;
  unsigned threads = 0;
  app.add_flag("--json", as_json, "Print a JSON summary to stdout");
  app.add_option("--threads", threads, "Worker thread cap (0 = all cores)");
  app.add_flag("--print-schema", print_schema, "Print the config JSON schema and exit");

  SolveArgs solve;
  auto* c_solve = app.add_subcommand("solve-normals", "Normals and albedo from a photometric image stack");
  c_solve->add_option("--stack", solve.stack, "Stack manifest JSON")->required()->check(CLI::ExistingFile);
  c_solve->add_option("--rig", solve.rig, "Light rig, e.g. octagon:45:8 (overrides manifest lights)");
  c_solve->add_option("--config", solve.config, "Pipeline config (solver section)")->check(CLI::ExistingFile);
  c_solve->add_option("--out", solve.out, "Output directory")->required();

  BuildDictArgs bd;
  auto* c_dict = app.add_subcommand("build-dict", "Patch dictionary from normal maps");
  c_dict->add_option("--maps", bd.maps, "Normal map PNGs")->required()->check(CLI::ExistingFile);
  c_dict->add_option("--patch", bd.patch, "Patch side in pixels");
  c_dict->add_option("--stride", bd.stride, "Sampling stride in pixels");
  c_dict->add_option("--out", bd.out, "Output directory")->required();

  SynthArgs sy;
  auto* c_synth = app.add_subcommand("synth-texture", "Grow a normal-map texture from a seed patch");
  c_synth->add_option("--seed", sy.seed, "Seed normal map PNG")->required()->check(CLI::ExistingFile);
  c_synth->add_option("--dict", sy.dict, "Dictionary directory")->required()->check(CLI::ExistingDirectory);
  c_synth->add_option("--size", sy.size, "Target size WxH");
  c_synth->add_option("--rng", sy.rng, "Random seed");
  c_synth->add_option("--top-k", sy.top_k, "Candidates per paste");
  c_synth->add_option("--overlap", sy.overlap, "Window overlap in pixels");
  c_synth->add_option("--out", sy.out, "Output PNG")->required();
  c_synth->add_option("--log", sy.log, "Paste log JSON");

  DefectArgs df;
  auto* c_defect = app.add_subcommand("gen-defect", "Blow-hole height map and mask");
  c_defect->add_option("--radius", df.params.radius_mm, "Radius in mm");
  c_defect->add_option("--depth", df.params.depth_mm, "Depth in mm");
  c_defect->add_option("--edge-amp", df.params.edge_amplitude, "Rim noise amplitude (fraction of radius)");
  c_defect->add_option("--edge-kind", df.edge_kind, "fractal or turbulence");
  c_defect->add_option("--edge-octaves", df.params.edge_noise.octaves);
  c_defect->add_option("--edge-frequency", df.params.edge_noise.base_frequency, "Cycles per mm");
  c_defect->add_option("--floor-amp", df.params.floor_amplitude, "Floor noise amplitude (fraction of depth)");
  c_defect->add_option("--floor-kind", df.floor_kind, "fractal or turbulence");
  c_defect->add_option("--floor-octaves", df.params.floor_noise.octaves);
  c_defect->add_option("--floor-frequency", df.params.floor_noise.base_frequency, "Cycles per mm");
  c_defect->add_option("--power", df.params.profile_power, "Profile exponent");
  c_defect->add_option("--resolution", df.params.resolution, "Pixels per mm");
  c_defect->add_option("--seed", df.seed, "Instance seed");
  c_defect->add_option("--ranges", df.ranges, "Parameter ranges JSON for batch mode")->check(CLI::ExistingFile);
  c_defect->add_option("--n", df.n, "Batch size")->check(CLI::PositiveNumber);
  c_defect->add_option("--out", df.out, "Height map PNG, or directory in batch mode")->required();
  c_defect->add_option("--mask", df.mask, "Mask PNG");

  std::string scene_path, render_out;
  auto* c_render = app.add_subcommand("render", "Render one scene description");
  c_render->add_option("--scene", scene_path, "Scene JSON")->required()->check(CLI::ExistingFile);
  c_render->add_option("--out", render_out, "Output directory")->required();

  std::string config_path, dataset_out;
  std::optional<int> ds_n;
  std::optional<std::uint64_t> ds_seed;
  auto* c_dataset = app.add_subcommand("dataset", "Randomized image/mask dataset with manifest");
  c_dataset->add_option("--config", config_path, "Pipeline config JSON")->required();
  c_dataset->add_option("--out", dataset_out, "Output directory")->required();
  c_dataset->add_option("--n", ds_n, "Override n_images")->check(CLI::PositiveNumber);
  c_dataset->add_option("--seed", ds_seed, "Override master_seed");

  std::string manifest_path, split_out;
  double test_frac = 0.1;
  std::uint64_t split_seed = 0;
  auto* c_split = app.add_subcommand("split", "Tag manifest records train/test");
  c_split->add_option("--manifest", manifest_path, "manifest.jsonl")->required()->check(CLI::ExistingFile);
  c_split->add_option("--test-frac", test_frac, "Test fraction in (0,1)");
  c_split->add_option("--seed", split_seed, "Shuffle seed");
  c_split->add_option("--out", split_out, "Output JSONL (default <stem>.split.jsonl)");

  DemoArgs dm;
  auto* c_demo = app.add_subcommand("demo", "End-to-end run on procedural sample data");
  c_demo->add_option("--out", dm.out, "Output directory")->required();
  c_demo->add_option("--n", dm.n, "Dataset images")->check(CLI::PositiveNumber);
  c_demo->add_option("--seed", dm.seed, "Master seed");
  c_demo->add_option("--image-size", dm.image_size, "Rendered image side")->check(CLI::PositiveNumber);

  std::string validate_path;
  auto* c_validate = app.add_subcommand("validate-config", "Check a pipeline config without writing anything");
  c_validate->add_option("--config", validate_path, "Pipeline config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "UsageError", e.what(), kUsageError);
    err << app.help();
    return kUsageError;
  }

  if (print_schema) {
    out << pipeline_schema().dump(2) << '\n';
    return kOk;
  }
  if (app.get_subcommands().empty()) {
    print_error(err, "UsageError", "a subcommand is required", kUsageError);
    err << app.help();
    return kUsageError;
  }
  set_max_threads(threads);

  CLI::App* sub = app.get_subcommands().front();
  Report report(sub->get_name());
  try {
    if (sub == c_solve) {
      cmd_solve_normals(solve, report);
    } else if (sub == c_dict) {
      cmd_build_dict(bd, report);
    } else if (sub == c_synth) {
      cmd_synth_texture(sy, report);
    } else if (sub == c_defect) {
      cmd_gen_defect(df, report);
    } else if (sub == c_render) {
      cmd_render(scene_path, render_out, report);
    } else if (sub == c_dataset) {
      cmd_dataset(load_pipeline_config(config_path), ds_n, ds_seed, dataset_out, report);
    } else if (sub == c_split) {
      cmd_split(manifest_path, test_frac, split_seed, split_out, report);
    } else if (sub == c_demo) {
      cmd_demo(dm, report);
    } else if (sub == c_validate) {
      load_pipeline_config(validate_path).validate();
      report.summary()["valid"] = true;
      if (!as_json) out << "ok\n";
    }
  } catch (const UsageError& e) {
    print_error(err, "UsageError", e.what(), kUsageError);
    return kUsageError;
  } catch (const ConfigError& e) {
    print_error(err, "ConfigError", e.what(), kConfigError);
    return kConfigError;
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    print_error(err, std::string(to_string(e.code())), e.message(), code);
    return code;
  } catch (const std::exception& e) {
    print_error(err, "InternalError", e.what(), kStageError);
    return kStageError;
  }
  report.print(out, as_json);
  return kOk;
}

}  // namespace defectsim::cli
