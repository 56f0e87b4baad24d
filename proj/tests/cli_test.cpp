// Copyright 2026 The fbaug Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <fstream>
#include <functional>
#include <sstream>

#include "fbaug/cli.hpp"
#include "test_support.hpp"

namespace fbaug {
namespace {

using testing::TempDir;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// --- config file ------------------------------------------------------------

TEST(ConfigJson, DefaultsWhenEmpty) {
  const RunConfig cfg = apply_config_json(json::object());
  EXPECT_EQ(cfg, RunConfig{});
  EXPECT_EQ(cfg.augment.rho, 0.5);
  EXPECT_EQ(cfg.augment.area_low, 0.02);
  EXPECT_EQ(cfg.augment.area_high, 0.40);
  EXPECT_EQ(cfg.augment.noise_mean, 0.5);
  EXPECT_EQ(cfg.augment.noise_sigma, 0.25);
  EXPECT_EQ(cfg.augment.patch_side_min_frac, 1.0 / 16);
  EXPECT_EQ(cfg.augment.patch_side_max_frac, 1.0 / 4);
  EXPECT_EQ(cfg.augment.grid_divisions, (std::vector<int>{2, 4, 8}));
  EXPECT_TRUE(cfg.augment.enable_fpn);
  EXPECT_TRUE(cfg.augment.enable_bps);
  EXPECT_EQ(cfg.theta, 0.5);
  EXPECT_FALSE(cfg.skip_missing);
}

TEST(ConfigJson, RejectsUnknownAndMistypedKeys) {
  EXPECT_THROW(apply_config_json(json{{"rho", 0.5}, {"sigma", 1}}), ConfigError);
  EXPECT_THROW(apply_config_json(json{{"rho", "high"}}), ConfigError);
  EXPECT_THROW(apply_config_json(json{{"enable_fpn", 1}}), ConfigError);
  EXPECT_THROW(apply_config_json(json{{"grid_divisions", 4}}), ConfigError);
  EXPECT_THROW(apply_config_json(json{{"grid_divisions", {2.5}}}), ConfigError);
  EXPECT_THROW(apply_config_json(json{{"rho", 2.0}}), ConfigError);
  EXPECT_THROW(apply_config_json(json::array()), ConfigError);
}

TEST(ConfigJson, CanonicalizesDivisions) {
  const RunConfig cfg = apply_config_json(json{{"grid_divisions", {8, 2, 8, 4}}});
  EXPECT_EQ(cfg.augment.grid_divisions, (std::vector<int>{2, 4, 8}));
}

TEST(ConfigJson, RoundTrip) {
  RunConfig cfg;
  cfg.augment.rho = 0.8;
  cfg.augment.grid_divisions = {3};
  cfg.augment.enable_bps = false;
  cfg.theta = 0.3;
  cfg.skip_missing = true;
  EXPECT_EQ(apply_config_json(config_to_json(cfg)), cfg);
}

TEST(ConfigJson, ParseSeed) {
  EXPECT_EQ(parse_seed("18446744073709551615"), 18446744073709551615ULL);
  EXPECT_THROW(parse_seed("18446744073709551616"), ConfigError);
  EXPECT_THROW(parse_seed("-1"), ConfigError);
  EXPECT_THROW(parse_seed("12abc"), ConfigError);
  EXPECT_THROW(parse_seed(""), ConfigError);
}

// --- precedence: defaults < file < flag, one case per field ----------------

struct FieldCase {
  const char* key;
  json file_value;
  std::function<void(cli::ConfigOverrides&)> set_override;
  std::function<bool(const RunConfig&)> has_default;
  std::function<bool(const RunConfig&)> has_file;
  std::function<bool(const RunConfig&)> has_override;
};

void PrintTo(const FieldCase& c, std::ostream* os) { *os << c.key; }

class Precedence : public ::testing::TestWithParam<FieldCase> {};

TEST_P(Precedence, FlagBeatsFileBeatsDefault) {
  const FieldCase& fc = GetParam();
  TempDir dir;
  const fs::path file = dir / "cfg.json";
  std::ofstream(file) << json{{fc.key, fc.file_value}}.dump();

  cli::ConfigOverrides none;
  cli::ConfigOverrides flag;
  fc.set_override(flag);

  EXPECT_TRUE(fc.has_default(cli::resolve_config(std::nullopt, none)));
  EXPECT_TRUE(fc.has_file(cli::resolve_config(file, none)));
  EXPECT_TRUE(fc.has_override(cli::resolve_config(file, flag)));
  EXPECT_TRUE(fc.has_override(cli::resolve_config(std::nullopt, flag)));
}

#define FIELD_CASE(field, access, dflt, fv, ov)                                 \
  FieldCase {                                                                 \
    #field, json(fv), [](cli::ConfigOverrides& o) { o.field = ov; },          \
        [](const RunConfig& c) { return c.access == (dflt); },                \
        [](const RunConfig& c) { return c.access == (fv); },                  \
        [](const RunConfig& c) { return c.access == (ov); }                   \
  }

INSTANTIATE_TEST_SUITE_P(
    AllFields, Precedence,
    ::testing::Values(
        FIELD_CASE(rho, augment.rho, 0.5, 0.8, 0.3),
        FIELD_CASE(area_low, augment.area_low, 0.02, 0.05, 0.1),
        FIELD_CASE(area_high, augment.area_high, 0.40, 0.3, 0.2),
        FIELD_CASE(noise_mean, augment.noise_mean, 0.5, 0.4, 0.6),
        FIELD_CASE(noise_sigma, augment.noise_sigma, 0.25, 0.1, 0.0),
        FIELD_CASE(patch_side_min_frac, augment.patch_side_min_frac, 1.0 / 16,
                 0.1, 0.2),
        FIELD_CASE(patch_side_max_frac, augment.patch_side_max_frac, 0.25, 0.5,
                 0.75),
        FIELD_CASE(grid_divisions, augment.grid_divisions,
                 (std::vector<int>{2, 4, 8}), (std::vector<int>{4}),
                 (std::vector<int>{2, 3})),
        FIELD_CASE(enable_fpn, augment.enable_fpn, true, false, true),
        FIELD_CASE(enable_bps, augment.enable_bps, true, false, true),
        FIELD_CASE(theta, theta, 0.5, 0.7, 0.2),
        FIELD_CASE(skip_missing, skip_missing, false, true, false)),
    [](const auto& info) { return std::string(info.param.key); });

#undef FIELD_CASE

TEST(Precedence, CommandLineFlagsReachResolvedConfig) {
  TempDir dir;
  testing::write_fixture(dir / "images", dir / "masks", 2, 16, 16, 1);
  std::ofstream(dir / "cfg.json") << R"({"rho": 0.0, "grid_divisions": [4]})";
  const auto r = run({"augment", "--images", (dir / "images").string(),
                      "--masks", (dir / "masks").string(), "--out",
                      (dir / "out").string(), "--seed", "3", "--config",
                      (dir / "cfg.json").string(), "--rho", "1",
                      "--grid-divisions", "2,8", "--enable-fpn", "false",
                      "--theta", "0.25"});
  ASSERT_EQ(r.code, 0) << r.err;
  const RunManifest m = load_manifest(dir / "out" / kManifestName);
  EXPECT_EQ(m.config.augment.rho, 1.0);
  EXPECT_EQ(m.config.augment.grid_divisions, (std::vector<int>{2, 8}));
  EXPECT_FALSE(m.config.augment.enable_fpn);
  EXPECT_EQ(m.config.theta, 0.25);
}

// --- commands ---------------------------------------------------------------

TEST(RunCli, UsageErrors) {
  auto r = run({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("augment"), std::string::npos);

  r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());

  r = run({"augment", "--images", "a", "--masks", "b", "--out", "c", "--seed",
           "1", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);

  r = run({"augment", "--images", "a"});
  EXPECT_EQ(r.code, 2);

  r = run({"--help"});
  EXPECT_EQ(r.code, 0);
}

TEST(RunCli, BadSeedAndMissingDirsAreFatal) {
  TempDir dir;
  auto r = run({"augment", "--images", (dir / "x").string(), "--masks",
                (dir / "y").string(), "--out", (dir / "o").string(), "--seed",
                "abc"});
  EXPECT_EQ(r.code, 2);
  r = run({"augment", "--images", (dir / "x").string(), "--masks",
           (dir / "y").string(), "--out", (dir / "o").string(), "--seed", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("not found"), std::string::npos);
}

class CliRunTest : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::write_fixture(dir_ / "images", dir_ / "masks", 5, 48, 40, 9);
  }
  CliResult augment(const std::string& out, const std::string& seed,
                    std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"augment", "--images",
                                     (dir_ / "images").string(), "--masks",
                                     (dir_ / "masks").string(), "--out",
                                     (dir_ / out).string(), "--seed", seed,
                                     "--rho", "1"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }
  CliResult verify(const std::string& out) {
    return run({"verify", "--original", (dir_ / "images").string(),
                "--augmented", (dir_ / out).string(), "--manifest",
                (dir_ / out / kManifestName).string()});
  }
  TempDir dir_;
};

TEST_F(CliRunTest, AugmentTwiceIsByteIdentical) {
  ASSERT_EQ(augment("o1", "42").code, 0);
  ASSERT_EQ(augment("o2", "42", {"--workers", "3"}).code, 0);
  EXPECT_EQ(testing::hash_tree(dir_ / "o1"), testing::hash_tree(dir_ / "o2"));
  ASSERT_EQ(augment("o3", "43").code, 0);
  EXPECT_NE(testing::hash_tree(dir_ / "o1"), testing::hash_tree(dir_ / "o3"));
}

TEST_F(CliRunTest, VerifyCleanRun) {
  ASSERT_EQ(augment("out", "7").code, 0);
  const auto r = verify("out");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("verified 5 outputs, 0 failed"), std::string::npos);
}

TEST_F(CliRunTest, VerifyCatchesFlippedBackgroundPixel) {
  ASSERT_EQ(augment("out", "7").code, 0);
  const fs::path victim = dir_ / "out" / "img_002.png";
  Image img = load_image(victim);
  img.at(0, 0, 2) ^= 0x01;  // corner pixel is background
  save_image(img, victim);
  const auto r = verify("out");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("img_002.png"), std::string::npos);
  EXPECT_EQ(r.out.find("img_001.png"), std::string::npos);
}

TEST_F(CliRunTest, VerifyCatchesEditedRecord) {
  ASSERT_EQ(augment("out", "7").code, 0);
  const fs::path mpath = dir_ / "out" / kManifestName;
  json j;
  std::ifstream(mpath) >> j;
  j["records"]["img_003.png"]["gate_value"] = 0.999;
  std::ofstream(mpath) << j.dump(2);
  const auto r = verify("out");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("img_003.png"), std::string::npos);
}

TEST_F(CliRunTest, JsonOutput) {
  const auto a = augment("out", "7", {"--json"});
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(json::parse(a.out)["processed"], 5);
  const auto v = run({"--json", "verify", "--original",
                      (dir_ / "images").string(), "--augmented",
                      (dir_ / "out").string(), "--manifest",
                      (dir_ / "out" / kManifestName).string()});
  ASSERT_EQ(v.code, 0);
  EXPECT_TRUE(json::parse(v.out)["ok"].get<bool>());
}

TEST_F(CliRunTest, ItemFailuresExitOne) {
  save_mask(BinaryMask(10, 10, 1), dir_ / "masks" / "img_001.png");
  const auto r = augment("out", "1");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("img_001.png"), std::string::npos);
}

TEST_F(CliRunTest, MissingMaskPolicy) {
  fs::remove(dir_ / "masks" / "img_004.png");
  EXPECT_EQ(augment("strict", "1").code, 2);
  const auto r = augment("lenient", "1", {"--skip-missing", "true"});
  EXPECT_EQ(r.code, 1);
  const RunManifest m = load_manifest(dir_ / "lenient" / kManifestName);
  EXPECT_EQ(m.processed, 4u);
  ASSERT_EQ(m.failures.size(), 1u);
  EXPECT_EQ(m.failures[0].path, "img_004.png");
}

TEST_F(CliRunTest, Bench) {
  const auto r = run({"bench", "--images", (dir_ / "images").string(),
                      "--masks", (dir_ / "masks").string(), "--seed", "1",
                      "--iterations", "2", "--workers", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("images/sec:"), std::string::npos);
  for (const char* stage : {"decode", "fpn", "bps", "composite", "encode"}) {
    EXPECT_NE(r.out.find(stage), std::string::npos) << stage;
  }
  const auto j = run({"--json", "bench", "--images",
                      (dir_ / "images").string(), "--masks",
                      (dir_ / "masks").string(), "--seed", "1"});
  ASSERT_EQ(j.code, 0);
  EXPECT_GT(json::parse(j.out)["images_per_second"].get<double>(), 0.0);
}

TEST(MaskThreshold, WritesBinaryMasks) {
  TempDir dir;
  fs::create_directories(dir / "sal" / "sub");
  const std::string text = "P5\n3 1\n255\n";
  Bytes pgm(text.begin(), text.end());
  pgm.insert(pgm.end(), {10, 128, 250});
  write_file(dir / "sal" / "sub" / "a.pgm", pgm);
  auto r = run({"mask-threshold", "--saliency", (dir / "sal").string(),
                "--out", (dir / "m").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_mask(dir / "m" / "sub" / "a.pgm"),
            BinaryMask(3, 1, std::vector<std::uint8_t>{0, 1, 1}));

  r = run({"mask-threshold", "--saliency", (dir / "sal").string(), "--out",
           (dir / "m2").string(), "--theta", "0.9"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(load_mask(dir / "m2" / "sub" / "a.pgm"),
            BinaryMask(3, 1, std::vector<std::uint8_t>{0, 0, 1}));

  write_file(dir / "sal" / "broken.png", Bytes{0x89, 'P', 'N', 'G'});
  r = run({"mask-threshold", "--saliency", (dir / "sal").string(), "--out",
           (dir / "m3").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("broken.png"), std::string::npos);
}

}  // namespace
}  // namespace fbaug
