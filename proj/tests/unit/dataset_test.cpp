#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "defectsim/dataset.hpp"
#include "test_util.hpp"

using namespace defectsim;

namespace {

RandomizationConfig small_config(int n) {
  RandomizationConfig cfg;
  cfg.n_images = n;
  cfg.master_seed = 42;
  cfg.scene.image_width = cfg.scene.image_height = 96;
  cfg.scene.plate_segments = 20;
  cfg.defect_param_ranges.resolution = Range<double>(8.0);
  return cfg;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Randomize, SameIndexSameScene) {
  const auto cfg = small_config(5);
  const auto res = DatasetResources::load(cfg, ".");
  const auto a = randomize_scene(cfg, res, 3);
  const auto b = randomize_scene(cfg, res, 3);
  EXPECT_EQ(scene_hash(a.scene), scene_hash(b.scene));
  EXPECT_NE(scene_hash(a.scene), scene_hash(randomize_scene(cfg, res, 4).scene));
  EXPECT_NE(scene_hash(a.scene), scene_hash(randomize_scene(cfg, res, 3, 1).scene));
  EXPECT_EQ(image_seed(42, 3, 0), image_seed(42, 3, 0));
  EXPECT_NE(image_seed(42, 3, 0), image_seed(43, 3, 0));
}

TEST(Randomize, DefectCountCoversRange) {
  auto cfg = small_config(1000);
  cfg.defects_per_image = Range<int>(1, 4);
  cfg.defect_param_ranges.radius_mm = Range<double>(0.3, 0.8);
  const auto res = DatasetResources::load(cfg, ".");
  std::set<std::size_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto n = randomize_scene(cfg, res, i).defects.size();
    ASSERT_GE(n, 1u);
    ASSERT_LE(n, 4u);
    seen.insert(n);
  }
  EXPECT_EQ(seen, (std::set<std::size_t>{1, 2, 3, 4}));
}

TEST(Randomize, DegenerateRangesPinValues) {
  auto cfg = small_config(1000);
  cfg.defects_per_image = Range<int>(2);
  cfg.camera_pose_ranges.azimuth_deg = Range<double>(30.0);
  cfg.camera_pose_ranges.elevation_deg = Range<double>(70.0);
  cfg.camera_pose_ranges.distance_mm = Range<double>(150.0);
  cfg.light_ranges.count = Range<int>(2);
  cfg.light_ranges.intensity = Range<double>(0.8);
  cfg.scene.albedo = Range<double>(0.6);
  cfg.defect_param_ranges.depth_mm = Range<double>(0.25);
  const auto res = DatasetResources::load(cfg, ".");
  for (int i = 0; i < 20; ++i) {
    const auto rs = randomize_scene(cfg, res, i);
    EXPECT_EQ(rs.defects.size(), 2u);
    EXPECT_EQ(rs.scene.lights.size(), 2u);
    for (const auto& l : rs.scene.lights) EXPECT_EQ(l.intensity, 0.8);
    EXPECT_EQ(rs.scene.material.albedo, 0.6);
    EXPECT_NEAR(rs.scene.camera.position.norm(), 150.0, 1e-9);
    for (const auto& d : rs.defects) EXPECT_EQ(d.params.depth_mm, 0.25);
  }
}

TEST(Randomize, HealthyImagesHaveNoDefects) {
  auto cfg = small_config(1000);
  cfg.healthy_fraction = 0.5;
  const auto res = DatasetResources::load(cfg, ".");
  int healthy = 0;
  for (int i = 0; i < 400; ++i) healthy += randomize_scene(cfg, res, i).defects.empty();
  EXPECT_GT(healthy, 150);
  EXPECT_LT(healthy, 250);
}

TEST(Randomize, PlacementsDoNotOverlapAndStayOnChart) {
  auto cfg = small_config(1000);
  cfg.defects_per_image = Range<int>(3, 4);
  const auto res = DatasetResources::load(cfg, ".");
  for (int i = 0; i < 100; ++i) {
    const auto rs = randomize_scene(cfg, res, i);
    const auto& ps = rs.scene.placements;
    for (std::size_t a = 0; a < ps.size(); ++a) {
      EXPECT_NO_THROW(ps[a].validate());
      for (std::size_t b = a + 1; b < ps.size(); ++b) {
        const double gap = (ps[a].uv_center - ps[b].uv_center).cwiseAbs().maxCoeff();
        EXPECT_GE(gap, ps[a].uv_half_extent() + ps[b].uv_half_extent());
      }
    }
  }
}

TEST(Config, ValidationAndJson) {
  auto cfg = small_config(3);
  EXPECT_NO_THROW(cfg.validate());
  const auto j = randomization_config_json(cfg);
  const auto back = randomization_config_from_json(j);
  EXPECT_EQ(randomization_config_json(back), j);
  EXPECT_EQ(config_hash(back), config_hash(cfg));

  auto bad = cfg;
  bad.camera_pose_ranges.elevation_deg = Range<double>(0.0, 90.0);
  EXPECT_THROW(bad.validate(), Error);
  bad = cfg;
  bad.defects_per_image = Range<int>(0, 2);
  EXPECT_THROW(bad.validate(), Error);
  try {
    randomization_config_from_json(nlohmann::json::parse(R"({"n_images": "ten"})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(GenerateDataset, RecordsBoxesAndRerunIdentity) {
  const auto dir = testutil::scratch_dir();
  auto cfg = small_config(10);
  const auto res = DatasetResources::load(cfg, ".");
  const DatasetManifest m = generate_dataset(cfg, res, dir / "a");
  ASSERT_EQ(m.records.size(), 10u);
  const DatasetManifest loaded = load_manifest(dir / "a" / "manifest.jsonl");
  ASSERT_EQ(loaded.records.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& r = loaded.records[i];
    EXPECT_EQ(r.index, static_cast<int>(i));
    EXPECT_GE(r.boxes.size(), 1u);
    EXPECT_EQ(r.config_hash, m.config_hash);
    EXPECT_EQ(nlohmann::json(r), nlohmann::json(m.records[i]));
    // Boxes recomputed from the stored mask file match the manifest.
    EXPECT_EQ(mask_components(load_mask(dir / "a" / r.mask)), r.boxes);
    const auto img = load_image(dir / "a" / r.image);
    EXPECT_EQ(img.width(), 96);
  }

  set_max_threads(1);
  generate_dataset(cfg, res, dir / "b");
  set_max_threads(0);
  EXPECT_EQ(read_bytes(dir / "a" / "manifest.jsonl"), read_bytes(dir / "b" / "manifest.jsonl"));
  for (const auto& r : m.records) {
    EXPECT_EQ(read_bytes(dir / "a" / r.image), read_bytes(dir / "b" / r.image));
    EXPECT_EQ(read_bytes(dir / "a" / r.mask), read_bytes(dir / "b" / r.mask));
  }
}

TEST(Split, CountsAndPartition) {
  EXPECT_EQ(round_half_even(953.0), 953u);
  EXPECT_EQ(round_half_even(0.5), 0u);
  EXPECT_EQ(round_half_even(1.5), 2u);
  EXPECT_EQ(round_half_even(2.5), 2u);
  EXPECT_EQ(round_half_even(2.5000001), 3u);

  for (std::size_t n : {10u, 11u, 25u, 9530u}) {
    DatasetManifest m;
    m.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) m.records[i].index = static_cast<int>(i);
    const auto s = split(m, 0.1, 7);
    std::size_t test = 0, train = 0;
    for (const auto& r : s.records) {
      test += r.split == "test";
      train += r.split == "train";
    }
    EXPECT_EQ(test, round_half_even(static_cast<double>(n) * 0.1));
    EXPECT_EQ(test + train, n);
    const auto again = split(m, 0.1, 7);
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(again.records[i].split, s.records[i].split);
  }
  DatasetManifest big;
  big.records.resize(9530);
  std::size_t test = 0;
  for (const auto& r : split(big, 0.1, 1).records) test += r.split == "test";
  EXPECT_EQ(test, 953u);
}

TEST(Split, Errors) {
  try {
    split({}, 0.1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyManifest);
  }
  DatasetManifest m;
  m.records.resize(3);
  EXPECT_THROW(split(m, 0.0, 0), Error);
  EXPECT_THROW(split(m, 1.0, 0), Error);
}

TEST(Manifest, MalformedLineIsRejected) {
  const auto dir = testutil::scratch_dir();
  std::ofstream(dir / "m.jsonl") << "{\"index\": 0}\nnot json\n";
  EXPECT_THROW(load_manifest(dir / "m.jsonl"), Error);
  EXPECT_THROW(load_manifest(dir / "absent.jsonl"), Error);
}

TEST(Randomize, InMemoryTexturesNeedNoPaths) {
  const auto cfg = small_config(4);
  auto res = DatasetResources::load(cfg, ".");
  res.textures.push_back(std::make_shared<const NormalMap>(NormalMap::constant(8, 8, Vec3(0, 0, 1))));
  const auto rs = randomize_scene(cfg, res, 2);
  EXPECT_EQ(rs.scene.material.texture_normals, res.textures[0]);
  EXPECT_EQ(rs.texture["texture_index"], 0);
  EXPECT_FALSE(rs.texture.contains("texture"));
}
