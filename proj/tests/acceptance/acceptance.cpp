// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "defectsim/defectsim.hpp"
#include "oracles.hpp"
#include "raycast_oracle.hpp"
#include "synthesis_oracles.hpp"

using namespace defectsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "defectsim_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Sum-of-sines height field with closed-form normals; tilt stays below 30 deg.
struct Waves {
  double h(double x, double y) const {
    return 1.1 * std::sin(x / 9.0) * std::cos(y / 13.0) + 0.6 * std::sin((x + 2.0 * y) / 7.0);
  }
  Vec3 normal(double x, double y) const {
    const double hx = 1.1 / 9.0 * std::cos(x / 9.0) * std::cos(y / 13.0) + 0.6 / 7.0 * std::cos((x + 2.0 * y) / 7.0);
    const double hy = -1.1 / 13.0 * std::sin(x / 9.0) * std::sin(y / 13.0) + 1.2 / 7.0 * std::cos((x + 2.0 * y) / 7.0);
    return Vec3(-hx, -hy, 1.0).normalized();
  }
};

// Texture in image orientation: row y maps to surface v = size - y.
NormalMap wave_texture(int size, double phase = 0.0) {
  const Waves w;
  std::vector<Vec3> n(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) n[static_cast<std::size_t>(y) * size + x] = w.normal(x + 0.5 + phase, size - y - 0.5);
  return NormalMap(size, size, std::move(n));
}

// Rough texture for synthesis: waves plus per-pixel fractal detail.
NormalMap rough_texture(int size, std::uint64_t seed) {
  NoiseSpec spec;
  spec.octaves = 3;
  spec.base_frequency = 1.0 / 6.0;
  spec.seed = seed;
  const Waves w;
  std::vector<Vec3> n(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const Vec3 base = w.normal(x, y);
      const Vec3 d(0.3 * fbm(x, y, spec), 0.3 * fbm(x + 100.0, y, spec), 0.0);
      n[static_cast<std::size_t>(y) * size + x] = (base + d).normalized();
    }
  return NormalMap(size, size, std::move(n));
}

NormalMap crop(const NormalMap& m, int x0, int y0, int size) {
  std::vector<Vec3> n;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) n.push_back(m.at(x0 + x, y0 + y));
  return NormalMap(size, size, std::move(n));
}

// Union-find 8-connected labelling, independent of the flood fill under test.
std::vector<BoundingBox> union_find_boxes(const MaskMap& m) {
  const int w = m.width(), h = m.height();
  std::vector<std::size_t> parent(m.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      if (!m[i]) continue;
      for (auto [dx, dy] : {std::pair{-1, 0}, {-1, -1}, {0, -1}, {1, -1}}) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w) continue;
        const auto j = static_cast<std::size_t>(ny) * w + nx;
        if (m[j] == m[i]) parent[find(i)] = find(j);
      }
    }
  std::map<std::size_t, BoundingBox> boxes;
  std::map<std::size_t, std::size_t> first;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      if (!m[i]) continue;
      const auto r = find(i);
      auto [it, fresh] = boxes.try_emplace(r, BoundingBox{m[i], x, y, x, y, 0});
      if (fresh) first[i] = r;
      auto& b = it->second;
      b.x0 = std::min(b.x0, x);
      b.x1 = std::max(b.x1, x);
      b.y0 = std::min(b.y0, y);
      b.y1 = std::max(b.y1, y);
      ++b.area;
    }
  std::vector<BoundingBox> out;
  for (const auto& [pixel, root] : first) out.push_back(boxes[root]);
  return out;
}

// ---------------------------------------------------------------------------

Outcome sphere_round_trip() {
  const LightRig rig = octagon_rig(45.0, 8);
  const oracle::Sphere sphere{256, 0.45 * 256};
  auto normal = [&](int x, int y) { return sphere.inside(x, y) ? sphere.normal(x, y) : Vec3(0, 0, 1); };
  const ImageStack stack(oracle::lambertian_stack(256, 256, rig, normal, [](int, int) { return 0.9; }), rig);
  set_max_threads(1);
  const auto t0 = std::chrono::steady_clock::now();
  const StereoResult r = solve_normals(stack);
  const double secs = seconds_since(t0);
  set_max_threads(0);
  double sum = 0.0, worst = 0.0;
  std::size_t count = 0, invalid = 0;
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) {
      if (!sphere.inside(x, y)) continue;
      const Vec3 n = sphere.normal(x, y);
      bool lit = true;
      for (std::size_t k = 0; k < rig.count(); ++k) lit = lit && rig[k].dot(n) > 0.0;
      if (!lit) continue;
      if (!r.normals.valid(x, y)) {
        ++invalid;
        continue;
      }
      const double e = angle_between_deg(r.normals.at(x, y), n);
      sum += e;
      worst = std::max(worst, e);
      ++count;
    }
  const double mean = count ? sum / count : 1e9;
  return {count > 20000 && invalid == 0 && mean < 0.1 && worst < 0.5 && secs < 5.0,
          fmt("%zu unshadowed px, %zu invalid, mean %.2e deg, max %.2e deg, %.3f s single-thread", count, invalid,
              mean, worst, secs)};
}

Outcome stereo_plate_round_trip() {
  const int size = 512;
  const auto texture = std::make_shared<const NormalMap>(wave_texture(size));
  Scene s;
  s.mesh = make_plate(40.0, 40.0, 1);
  s.material.albedo = 0.8;
  s.material.texture_normals = texture;
  const double distance = 4000.0;
  s.camera.position = {0.0, 0.0, distance};
  s.camera.vfov_deg = 2.0 * std::atan(20.0 / distance) * 180.0 / std::numbers::pi;
  s.camera.width = s.camera.height = size;
  const LightRig rig = octagon_rig(45.0, 8);
  const auto t0 = std::chrono::steady_clock::now();
  const ImageStack stack = render_stack_for_stereo(s, rig);
  const StereoResult r = solve_normals(stack);
  const double secs = seconds_since(t0);
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      if (!r.normals.valid(x, y)) continue;
      sum += angle_between_deg(r.normals.at(x, y), texture->at(x, y));
      ++count;
    }
  const double mean = count ? sum / count : 1e9;
  const double coverage = static_cast<double>(count) / (size * size);
  return {mean < 1.0 && coverage > 0.99 && secs < 30.0,
          fmt("%dx%d, %.2f%% pixels valid, mean %.3e deg, %.2f s", size, size, 100.0 * coverage, mean, secs)};
}

Outcome inpainting_oracle() {
  const NormalMap source = rough_texture(256, 3);
  const PatchDictionary dict = build_dictionary({source}, 8, 6);
  Rng rng(17);
  const std::size_t ps2 = 64;
  int mismatches = 0;
  for (int q = 0; q < 100; ++q) {
    std::vector<std::uint8_t> query(3 * ps2), mask(ps2);
    const auto base = dict.patch(uniform_index(rng, dict.size()));
    for (std::size_t i = 0; i < query.size(); ++i)
      query[i] = static_cast<std::uint8_t>(std::clamp<int>(base[i] + static_cast<int>(uniform_int(rng, -20, 20)), 0, 255));
    for (auto& m : mask) m = uniform01(rng) < 0.6;
    mask[uniform_index(rng, ps2)] = 1;
    const std::size_t k = 1 + uniform_index(rng, 10);
    if (nearest_patches(query, mask, dict, k) != oracle::brute_force_nearest(query, mask, dict, k)) ++mismatches;
  }

  SynthesisConfig cfg;
  cfg.target_width = cfg.target_height = 160;
  cfg.rng_seed = 5;
  const NormalMap seed = crop(source, 100, 100, 32);
  const SynthesisResult res = synthesize(seed, dict, cfg);
  const NormalMap replay = oracle::replay_paste_log(seed, dict, res, 160, 160);
  const bool replay_ok = replay.size() > 0 && replay == res.texture &&
                         encode_normal_map(replay).data == encode_normal_map(res.texture).data;
  return {dict.size() <= 2000 && mismatches == 0 && replay_ok,
          fmt("%zu patches, %d/100 queries differ from brute force, replay of %zu pastes %s", dict.size(), mismatches,
              res.log.size(), replay_ok ? "bit-identical" : "DIFFERS")};
}

Outcome synthesis_coverage() {
  const NormalMap source = rough_texture(256, 11);
  const PatchDictionary dict = build_dictionary({source}, 16, 8);
  const NormalMap seed = crop(source, 96, 96, 64);
  SynthesisConfig cfg;
  cfg.target_width = cfg.target_height = 1024;
  cfg.rng_seed = 99;
  const auto t0 = std::chrono::steady_clock::now();
  const SynthesisResult a = synthesize(seed, dict, cfg);
  const double secs = seconds_since(t0);
  const SynthesisResult b = synthesize(seed, dict, cfg);
  double worst_norm = 0.0;
  for (const auto& v : a.texture.normals()) worst_norm = std::max(worst_norm, std::abs(v.norm() - 1.0));
  const std::size_t unfilled = a.texture.size() - a.texture.valid_count();
  const bool same = encode_normal_map(a.texture).data == encode_normal_map(b.texture).data && a.texture == b.texture;
  return {unfilled == 0 && worst_norm <= 1e-6 && same && secs < 60.0,
          fmt("1024x1024 from 64x64 seed, %zu patches: %zu unfilled, max |n|-1 %.1e, reruns %s, %.1f s", dict.size(),
              unfilled, worst_norm, same ? "identical" : "DIFFER", secs)};
}

Outcome defect_geometry() {
  DefectParams p;
  p.radius_mm = 1.0;
  p.depth_mm = 0.5;
  p.resolution = 100.0;
  const DefectInstance d = generate_defect(p, 0);
  std::size_t area = 0;
  for (auto v : d.mask.data()) area += v;
  const double disk = std::numbers::pi * 100.0 * 100.0;
  const double area_err = std::abs(static_cast<double>(area) - disk) / disk;
  const double centre = d.height.at(d.size() / 2, d.size() / 2);

  DefectParams q = p;
  q.resolution = 40.0;
  q.edge_amplitude = 0.2;
  q.floor_amplitude = 0.3;
  q.depth_mm = 1.0;
  const DefectInstance unit = generate_defect(q, 8);
  double lin_err = 0.0;
  for (double depth : {0.05, 0.37, 2.5}) {
    q.depth_mm = depth;
    const DefectInstance s = generate_defect(q, 8);
    for (std::size_t i = 0; i < s.height.size(); ++i)
      lin_err = std::max(lin_err, std::abs(s.height[i] - depth * unit.height[i]));
  }

  Rng rng(2024);
  int inconsistent = 0;
  for (int t = 0; t < 1000; ++t) {
    const DefectParams r = sample_params({}, rng);
    const DefectInstance inst = generate_defect(r, rng());
    bool ok = inst.params == r;
    for (std::size_t i = 0; i < inst.height.size() && ok; ++i) {
      const double h = inst.height[i];
      ok = h <= 0.0 && (inst.mask[i] == 1u) == (h < -DefectInstance::kMaskEpsilon) && (inst.mask[i] <= 1u);
    }
    inconsistent += !ok;
  }
  return {area_err < 0.02 && centre == -0.5 && lin_err <= 1e-12 && inconsistent == 0,
          fmt("disk area error %.3f%%, centre depth %.17g, linearity error %.1e, %d/1000 mask-height mismatches",
              100.0 * area_err, centre, lin_err, inconsistent)};
}

Outcome noise_properties() {
  double lattice = 0.0;
  for (int y = -50; y <= 50; ++y)
    for (int x = -50; x <= 50; ++x)
      for (std::uint64_t s : {0ULL, 7ULL, 0xfeedULL}) lattice = std::max(lattice, std::abs(gradient_noise(x, y, s)));

  Rng rng(6);
  long violations = 0;
  std::vector<NoiseSpec> specs(3);
  specs[0].octaves = 1;
  specs[1].octaves = 4;
  specs[1].gain = 0.5;
  specs[2].octaves = 6;
  specs[2].gain = 0.7;
  specs[2].lacunarity = 2.7;
  specs[2].base_frequency = 0.3;
  double peak_ratio = 0.0;
  for (int i = 0; i < 1'000'000; ++i) {
    const NoiseSpec& s = specs[static_cast<std::size_t>(i) % specs.size()];
    const double x = uniform_real(rng, -500.0, 500.0), y = uniform_real(rng, -500.0, 500.0);
    const double bound = octave_weight_sum(s);
    const double f = fbm(x, y, s);
    const double t = turbulence(x, y, s);
    if (std::abs(f) > bound || t < 0.0 || t > bound) ++violations;
    peak_ratio = std::max(peak_ratio, std::abs(f) / bound);
  }
  return {lattice == 0.0 && violations == 0,
          fmt("max |noise| at lattice points %.1e, %ld bound violations over 1e6 fbm+turbulence samples (peak %.2f of "
              "bound)",
              lattice, violations, peak_ratio)};
}

Outcome render_mask_consistency() {
  RandomizationConfig cfg;
  cfg.n_images = 100;
  cfg.master_seed = 77;
  cfg.defects_per_image = Range<int>(1, 3);
  DatasetResources res = DatasetResources::load(cfg, ".");
  res.textures.push_back(std::make_shared<const NormalMap>(rough_texture(256, 4)));
  Rng rng(31);
  std::size_t checked = 0, skipped = 0, defect_px = 0;
  int mismatches = 0, bump_variants = 0;
  for (int i = 0; i < cfg.n_images; ++i) {
    const RandomizedScene rs = randomize_scene(cfg, res, i);
    const VisibilityBuffer vis(rs.scene);
    const MaskMap mask = vis.mask();
    const oracle::RayCaster caster(vis.mesh(), rs.scene.camera);
    const int w = rs.scene.camera.width, h = rs.scene.camera.height;
    for (int s = 0; s < 1000; ++s) {
      // Half the samples land inside defect boxes so the tagged region is exercised.
      int x, y;
      const auto boxes = mask_components(mask);
      if (s % 2 == 0 && !boxes.empty()) {
        const auto& b = boxes[uniform_index(rng, boxes.size())];
        x = static_cast<int>(uniform_int(rng, std::max(0, b.x0 - 2), std::min(w - 1, b.x1 + 2)));
        y = static_cast<int>(uniform_int(rng, std::max(0, b.y0 - 2), std::min(h - 1, b.y1 + 2)));
      } else {
        x = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(w)));
        y = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(h)));
      }
      const auto expect = caster.label(x, y);
      if (!expect) {
        ++skipped;
        continue;
      }
      ++checked;
      defect_px += *expect != 0;
      mismatches += mask.at(x, y) != *expect;
    }
    if (i % 10 == 0) {
      const MaskMap base = render(rs.scene).mask;
      for (double bump : {0.0, 0.5, 1.0}) {
        Scene t = rs.scene;
        t.material.bump_strength = bump;
        bump_variants += render(t).mask != base;
      }
    }
  }
  return {mismatches == 0 && bump_variants == 0 && checked > 90000,
          fmt("100 scenes: %zu pixels ray-cast (%zu on defects), %zu edge pixels skipped, %d mismatches; "
              "%d bump variants changed the mask",
              checked, defect_px, skipped, mismatches, bump_variants)};
}

Outcome viewpoint_dependence() {
  DefectParams p;
  p.radius_mm = 2.0;
  p.depth_mm = 1.5;
  p.profile_power = 0.3;
  p.resolution = 20.0;
  auto inst = std::make_shared<const DefectInstance>(generate_defect(p, 1));
  auto area_at = [&](double elevation_deg) {
    Scene s;
    s.mesh = make_plate(40.0, 40.0, 20);
    DefectPlacement pl;
    pl.instance = inst;
    pl.uv_scale = 1.0 / 40.0;
    s.placements = {pl};
    s.lights = {DirectionalLight{}};
    const double el = elevation_deg * std::numbers::pi / 180.0;
    s.camera.position = 150.0 * Vec3(std::cos(el), 0.0, std::sin(el));
    s.camera.up = elevation_deg == 90.0 ? Vec3(0.0, 1.0, 0.0) : Vec3(0.0, 0.0, 1.0);
    s.camera.vfov_deg = 12.0;
    const MaskMap m = render(s).mask;
    std::size_t a = 0;
    for (auto v : m.data()) a += v != 0;
    return a;
  };
  const std::size_t top = area_at(90.0);
  const std::size_t grazing = area_at(12.0);
  return {top > 0 && grazing < top, fmt("mask area top-down %zu px, grazing (12 deg) %zu px", top, grazing)};
}

Outcome dataset_contract() {
  RandomizationConfig cfg;
  cfg.n_images = 100;
  cfg.master_seed = 2024;
  const DatasetResources res = DatasetResources::load(cfg, ".");
  const fs::path a = scratch("dataset_a"), b = scratch("dataset_b");
  const auto t0 = std::chrono::steady_clock::now();
  const DatasetManifest m = generate_dataset(cfg, res, a);
  const double secs = seconds_since(t0);
  generate_dataset(cfg, res, b);

  int bad_boxes = 0, empty = 0;
  const DatasetManifest loaded = load_manifest(a / "manifest.jsonl");
  for (const auto& r : loaded.records) {
    empty += r.boxes.empty();
    if (union_find_boxes(load_mask(a / r.mask)) != r.boxes) ++bad_boxes;
  }
  bool identical = read_bytes(a / "manifest.jsonl") == read_bytes(b / "manifest.jsonl");
  for (const auto& r : m.records)
    identical = identical && read_bytes(a / r.image) == read_bytes(b / r.image) &&
                read_bytes(a / r.mask) == read_bytes(b / r.mask);

  const DatasetManifest s = split(loaded, 0.1, 3);
  std::size_t test = 0, train = 0;
  for (const auto& r : s.records) {
    test += r.split == "test";
    train += r.split == "train";
  }
  const bool split_ok = test == 10 && test + train == 100;
  fs::remove_all(b);
  return {loaded.records.size() == 100 && empty == 0 && bad_boxes == 0 && identical && split_ok && secs < 600.0,
          fmt("%zu records, %d without boxes, %d with boxes not matching the mask, split %zu test / %zu train, "
              "rerun %s, %.1f s",
              loaded.records.size(), empty, bad_boxes, test, train, identical ? "byte-identical" : "DIFFERS", secs)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"stereo-sphere-round-trip", sphere_round_trip},
      {"stereo-rendered-plate-round-trip", stereo_plate_round_trip},
      {"inpainting-oracle-equivalence", inpainting_oracle},
      {"inpainting-coverage-determinism", synthesis_coverage},
      {"defect-geometry", defect_geometry},
      {"noise-properties", noise_properties},
      {"render-mask-consistency", render_mask_consistency},
      {"viewpoint-dependence", viewpoint_dependence},
      {"dataset-contract", dataset_contract},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
