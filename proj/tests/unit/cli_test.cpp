#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "defectsim/cli.hpp"
#include "test_util.hpp"

using namespace defectsim;

namespace {

struct RunResult {
  int code = 0;
  std::string out;
  std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "defectsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

}  // namespace

TEST(Cli, ValidateConfigWritesNothing) {
  const auto dir = testutil::scratch_dir();
  write_file(dir / "ok.json", R"({"master_seed": 3, "randomization": {"n_images": 4}})");
  const std::size_t before = count_files(dir);
  const auto r = run_cli({"validate-config", "--config", (dir / "ok.json").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "ok\n");
  EXPECT_EQ(count_files(dir), before);
}

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = run_cli({"render", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run_cli({}).code, 2);
}

TEST(Cli, BadConfigIsConfigError) {
  const auto dir = testutil::scratch_dir();
  write_file(dir / "bad.json", R"({"randomization": {"n_images": 0}})");
  const auto r = run_cli({"validate-config", "--config", (dir / "bad.json").string()});
  EXPECT_EQ(r.code, 3);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j["error"]["exit_code"], 3);
  write_file(dir / "garbage.json", "{not json");
  EXPECT_EQ(run_cli({"validate-config", "--config", (dir / "garbage.json").string()}).code, 3);
  EXPECT_EQ(run_cli({"validate-config", "--config", (dir / "absent.json").string()}).code, 3);
}

TEST(Cli, StageFailureExitsOne) {
  const auto dir = testutil::scratch_dir();
  write_file(dir / "scene.json", R"({
    "mesh": {"plate": {"width_mm": 20, "height_mm": 20, "segments": 4}},
    "defects": [{"params": {"radius_mm": 2, "depth_mm": 0.3, "resolution": 5}, "uv_center": [0.01, 0.5], "uv_scale": 0.05}],
    "lights": [{"direction": [0, 0, 1]}]
  })");
  const auto r = run_cli({"render", "--scene", (dir / "scene.json").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"]["code"], "FootprintOutsideChart");
}

TEST(Cli, PrintSchemaIsJson) {
  const auto r = run_cli({"--print-schema"});
  EXPECT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.is_object());
}

TEST(Cli, GenDefectSingleAndBatch) {
  const auto dir = testutil::scratch_dir();
  auto r = run_cli({"gen-defect", "--radius", "0.5", "--depth", "0.2", "--resolution", "20", "--out",
                    (dir / "d.png").string(), "--mask", (dir / "m.png").string(), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "d.png"));
  EXPECT_TRUE(fs::exists(dir / "m.png"));
  EXPECT_EQ(nlohmann::json::parse(r.out)["command"], "gen-defect");

  write_file(dir / "ranges.json", R"({"radius_mm": [0.3, 0.6], "resolution": 15})");
  r = run_cli({"gen-defect", "--ranges", (dir / "ranges.json").string(), "--n", "4", "--seed", "9", "--out",
               (dir / "batch").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto index = nlohmann::json::parse(read_bytes(dir / "batch" / "defects.json"));
  ASSERT_EQ(index.size(), 4u);
  EXPECT_TRUE(fs::exists(dir / "batch" / "defect_0003_mask.png"));

  // Defect i does not depend on the batch size.
  r = run_cli({"gen-defect", "--ranges", (dir / "ranges.json").string(), "--n", "2", "--seed", "9", "--out",
               (dir / "short").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_bytes(dir / "short" / "defect_0001.png"), read_bytes(dir / "batch" / "defect_0001.png"));
}

TEST(Cli, DemoIsDeterministicAndSplits) {
  const auto dir = testutil::scratch_dir();
  for (const char* sub : {"a", "b"}) {
    const auto r = run_cli({"demo", "--out", (dir / sub).string(), "--n", "5", "--image-size", "96"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto manifest = dir / "a" / "dataset" / "manifest.jsonl";
  ASSERT_TRUE(fs::exists(manifest));
  EXPECT_EQ(read_bytes(manifest), read_bytes(dir / "b" / "dataset" / "manifest.jsonl"));
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    EXPECT_EQ(read_bytes(e.path()), read_bytes(dir / "b" / rel)) << rel;
  }

  const auto r = run_cli({"split", "--manifest", manifest.string(), "--test-frac", "0.2", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = load_manifest(dir / "a" / "dataset" / "manifest.split.jsonl");
  std::size_t test = 0;
  for (const auto& rec : m.records) test += rec.split == "test";
  EXPECT_EQ(test, 1u);
}

TEST(Cli, DatasetFromConfigWithOverrides) {
  const auto dir = testutil::scratch_dir();
  write_file(dir / "cfg.json", R"({"master_seed": 5, "randomization": {"n_images": 50},
    "scene": {"image_width": 64, "image_height": 64, "plate_segments": 10},
    "defect_ranges": {"resolution": 12}})");
  const auto r = run_cli({"dataset", "--config", (dir / "cfg.json").string(), "--out", (dir / "ds").string(),
                          "--n", "3", "--json", "--threads", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["records"], 3);
  EXPECT_EQ(load_manifest(dir / "ds" / "manifest.jsonl").records.size(), 3u);
}

TEST(CliBinary, ExitCodesThroughTheExecutable) {
  const std::string exe = DEFECTSIM_CLI_PATH;
  auto status = [&](const std::string& args) {
    const int s = std::system((exe + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("no-such-command"), 2);
  EXPECT_EQ(status("--print-schema --json"), 0);
}
