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

// Command-line front end:
//
//   fbaug augment        --images DIR --masks DIR --out DIR --seed N ...
//   fbaug mask-threshold --saliency DIR --out DIR [--theta X]
//   fbaug verify         --original DIR --augmented DIR --manifest FILE
//   fbaug bench          --images DIR --masks DIR --seed N ...
//
// Exit codes: 0 success, 1 per-item failures, 2 usage or fatal error.

#pragma once

#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fbaug/augment.hpp"
#include "fbaug/bench.hpp"
#include "fbaug/codec.hpp"
#include "fbaug/pipeline.hpp"
#include "fbaug/serialize.hpp"
#include "fbaug/verify.hpp"

namespace fbaug::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitItemFailures = 1;
inline constexpr int kExitFatal = 2;

/// Per-field command-line overrides. Set fields win over the config file.
struct ConfigOverrides {
  std::optional<double> rho;
  std::optional<double> area_low;
  std::optional<double> area_high;
  std::optional<double> noise_mean;
  std::optional<double> noise_sigma;
  std::optional<double> patch_side_min_frac;
  std::optional<double> patch_side_max_frac;
  std::optional<std::vector<int>> grid_divisions;
  std::optional<bool> enable_fpn;
  std::optional<bool> enable_bps;
  std::optional<double> theta;
  std::optional<bool> skip_missing;
};

/// defaults < config file < overrides.
inline RunConfig resolve_config(const std::optional<fs::path>& config_file,
                                const ConfigOverrides& o) {
  RunConfig cfg = config_file ? load_config_file(*config_file) : RunConfig{};
  AugmentConfig& a = cfg.augment;
  if (o.rho) a.rho = *o.rho;
  if (o.area_low) a.area_low = *o.area_low;
  if (o.area_high) a.area_high = *o.area_high;
  if (o.noise_mean) a.noise_mean = *o.noise_mean;
  if (o.noise_sigma) a.noise_sigma = *o.noise_sigma;
  if (o.patch_side_min_frac) a.patch_side_min_frac = *o.patch_side_min_frac;
  if (o.patch_side_max_frac) a.patch_side_max_frac = *o.patch_side_max_frac;
  if (o.grid_divisions) a.grid_divisions = canonical_divisions(*o.grid_divisions);
  if (o.enable_fpn) a.enable_fpn = *o.enable_fpn;
  if (o.enable_bps) a.enable_bps = *o.enable_bps;
  if (o.theta) cfg.theta = *o.theta;
  if (o.skip_missing) cfg.skip_missing = *o.skip_missing;
  a.validate();
  if (!(cfg.theta >= 0.0)) throw ConfigError("theta must be >= 0");
  return cfg;
}

namespace detail {

// CLI11 leaves std::optional untouched when the flag is absent.
inline void add_override_flags(CLI::App& app, ConfigOverrides& o) {
  app.add_option("--rho", o.rho, "mixing probability");
  app.add_option("--area-low", o.area_low, "lower noise area ratio");
  app.add_option("--area-high", o.area_high, "upper noise area ratio");
  app.add_option("--noise-mean", o.noise_mean, "noise mean (normalized)");
  app.add_option("--noise-sigma", o.noise_sigma, "noise sigma (normalized)");
  app.add_option("--patch-side-min-frac", o.patch_side_min_frac,
                 "minimum noise patch side / min(W,H)");
  app.add_option("--patch-side-max-frac", o.patch_side_max_frac,
                 "maximum noise patch side / min(W,H)");
  app.add_option_function<std::vector<int>>(
         "--grid-divisions",
         [&o](const std::vector<int>& v) { o.grid_divisions = v; },
         "grid divisions per side, e.g. 2,4,8")
      ->delimiter(',');
  app.add_option("--enable-fpn", o.enable_fpn, "foreground patch noise on/off");
  app.add_option("--enable-bps", o.enable_bps,
                 "background patch shuffling on/off");
  app.add_option("--theta", o.theta, "saliency threshold");
  app.add_option("--skip-missing", o.skip_missing,
                 "record images without a mask as failures instead of aborting");
}

inline std::string fmt_seconds(double s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << s;
  return os.str();
}

}  // namespace detail

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

inline int cmd_augment(const std::string& images, const std::string& masks,
                       const std::string& out_dir, std::uint64_t seed,
                       int workers, const RunConfig& cfg, bool as_json,
                       Streams io) {
  auto pairs = discover_pairs(images, masks, cfg.skip_missing);
  DatasetRun run;
  run.config = cfg;
  run.global_seed = seed;
  run.workers = workers;
  run.out_dir = out_dir;
  run.image_dir = images;
  run.mask_dir = masks;
  const RunManifest m = process_dataset(std::move(pairs), run);
  if (as_json) {
    io.out << json{{"processed", m.processed},
                   {"failed", m.failures.size()},
                   {"manifest", (fs::path(out_dir) / kManifestName).string()}}
                  .dump()
           << "\n";
  } else {
    io.out << "processed " << m.processed << ", failed " << m.failures.size()
           << ", manifest " << (fs::path(out_dir) / kManifestName).string()
           << "\n";
  }
  for (const Failure& f : m.failures) {
    io.err << "failed: " << f.path << ": " << f.error << "\n";
  }
  return m.failures.empty() ? kExitOk : kExitItemFailures;
}

inline int cmd_mask_threshold(const fs::path& saliency_dir,
                              const fs::path& out_dir, double theta,
                              bool as_json, Streams io) {
  if (!fs::is_directory(saliency_dir)) {
    throw MissingFileError("saliency directory not found: " +
                           saliency_dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(saliency_dir)) {
    if (e.is_regular_file() && has_extension_in(e.path(), kMaskExtensions)) {
      files.push_back(fs::relative(e.path(), saliency_dir));
    }
  }
  std::sort(files.begin(), files.end());
  std::size_t written = 0;
  std::vector<Failure> failures;
  for (const fs::path& rel : files) {
    try {
      const BinaryMask mask = threshold_mask(load_saliency(saliency_dir / rel),
                                             theta);
      const fs::path dst = out_dir / rel;
      fs::create_directories(dst.parent_path());
      save_mask(mask, dst);
      ++written;
    } catch (const Error& e) {
      failures.push_back({rel.generic_string(), e.what()});
    }
  }
  if (as_json) {
    io.out << json{{"written", written}, {"failed", failures.size()}}.dump()
           << "\n";
  } else {
    io.out << "wrote " << written << " masks, failed " << failures.size()
           << "\n";
  }
  for (const Failure& f : failures) {
    io.err << "failed: " << f.path << ": " << f.error << "\n";
  }
  return failures.empty() ? kExitOk : kExitItemFailures;
}

inline int cmd_verify(const fs::path& original, const fs::path& augmented,
                      const fs::path& manifest_path,
                      const std::optional<fs::path>& masks, bool as_json,
                      Streams io) {
  const RunManifest manifest = load_manifest(manifest_path);
  const VerifyReport rep = verify_run(original, augmented, manifest, masks);
  if (as_json) {
    json failures = json::array();
    for (const Failure& f : rep.failures) {
      failures.push_back({{"path", f.path}, {"error", f.error}});
    }
    io.out << json{{"checked", rep.checked},
                   {"ok", rep.ok()},
                   {"failures", failures}}
                  .dump()
           << "\n";
  } else {
    for (const Failure& f : rep.failures) {
      io.out << "FAIL " << f.path << ": " << f.error << "\n";
    }
    io.out << "verified " << rep.checked << " outputs, "
           << rep.failures.size() << " failed\n";
  }
  return rep.ok() ? kExitOk : kExitItemFailures;
}

inline int cmd_bench(const std::string& images, const std::string& masks,
                     std::uint64_t seed, int workers, int iterations,
                     const RunConfig& cfg, bool as_json, Streams io) {
  const auto pairs = discover_pairs(images, masks, cfg.skip_missing);
  const ThroughputReport rep =
      measure_throughput(pairs, cfg, seed, workers, iterations);
  const StageTimes& s = rep.stages;
  if (as_json) {
    io.out << json{{"images", rep.images},
                   {"failures", rep.failures},
                   {"workers", rep.workers},
                   {"iterations", rep.iterations},
                   {"wall_seconds", rep.wall_seconds},
                   {"images_per_second", rep.images_per_second},
                   {"stages",
                    {{"decode", s.decode},
                     {"fpn", s.fpn},
                     {"bps", s.bps},
                     {"composite", s.composite},
                     {"encode", s.encode}}}}
                  .dump()
           << "\n";
  } else {
    io.out << "images: " << rep.images << " (" << rep.iterations
           << " iterations, " << rep.workers << " workers)\n"
           << "wall: " << detail::fmt_seconds(rep.wall_seconds) << " s\n"
           << "images/sec: " << std::fixed << std::setprecision(2)
           << rep.images_per_second << "\n"
           << "stage seconds (summed over workers):\n"
           << "  decode    " << detail::fmt_seconds(s.decode) << "\n"
           << "  fpn       " << detail::fmt_seconds(s.fpn) << "\n"
           << "  bps       " << detail::fmt_seconds(s.bps) << "\n"
           << "  composite " << detail::fmt_seconds(s.composite) << "\n"
           << "  encode    " << detail::fmt_seconds(s.encode) << "\n";
  }
  return rep.failures == 0 ? kExitOk : kExitItemFailures;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"Foreground/background dual-region image augmentation"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "print reports as JSON");

  std::string images, masks, out_dir, seed_text, config_file;
  int workers = 1;
  int iterations = 1;
  ConfigOverrides overrides;

  auto* augment = app.add_subcommand("augment", "augment an image/mask dataset");
  augment->add_option("--images", images, "image directory")->required();
  augment->add_option("--masks", masks, "mask directory")->required();
  augment->add_option("--out", out_dir, "output directory")->required();
  augment->add_option("--seed", seed_text, "global seed (uint64)")->required();
  augment->add_option("--config", config_file, "JSON config file");
  augment->add_option("--workers", workers, "worker threads")
      ->check(CLI::PositiveNumber);
  augment->add_flag("--json", as_json, "print summary as JSON");
  detail::add_override_flags(*augment, overrides);

  std::string saliency;
  std::optional<double> theta;
  auto* mask_cmd = app.add_subcommand("mask-threshold",
                                      "threshold saliency maps into masks");
  mask_cmd->add_option("--saliency", saliency, "saliency map directory")
      ->required();
  mask_cmd->add_option("--out", out_dir, "output directory")->required();
  mask_cmd->add_option("--theta", theta, "threshold (default 0.5)");
  mask_cmd->add_flag("--json", as_json, "print summary as JSON");

  std::string original, augmented, manifest;
  std::optional<std::string> verify_masks;
  auto* verify = app.add_subcommand("verify", "re-check an augmented run");
  verify->add_option("--original", original, "original image directory")
      ->required();
  verify->add_option("--augmented", augmented, "augmented output directory")
      ->required();
  verify->add_option("--manifest", manifest, "manifest.json of the run")
      ->required();
  verify->add_option("--masks", verify_masks,
                     "mask directory (default: the one in the manifest)");
  verify->add_flag("--json", as_json, "print report as JSON");

  auto* bench = app.add_subcommand("bench", "measure end-to-end throughput");
  bench->add_option("--images", images, "image directory")->required();
  bench->add_option("--masks", masks, "mask directory")->required();
  bench->add_option("--seed", seed_text, "global seed (uint64)")->required();
  bench->add_option("--config", config_file, "JSON config file");
  bench->add_option("--workers", workers, "worker threads")
      ->check(CLI::PositiveNumber);
  bench->add_option("--iterations", iterations, "full passes")
      ->check(CLI::PositiveNumber);
  bench->add_flag("--json", as_json, "print report as JSON");
  detail::add_override_flags(*bench, overrides);

  std::vector<const char*> argv;
  argv.push_back("fbaug");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitFatal;
  }

  const Streams io{out, err};
  try {
    const std::optional<fs::path> cfg_path =
        config_file.empty() ? std::nullopt
                            : std::optional<fs::path>(config_file);
    if (augment->parsed()) {
      const RunConfig cfg = resolve_config(cfg_path, overrides);
      return cmd_augment(images, masks, out_dir, parse_seed(seed_text),
                         workers, cfg, as_json, io);
    }
    if (mask_cmd->parsed()) {
      return cmd_mask_threshold(saliency, out_dir, theta.value_or(kDefaultTheta),
                                as_json, io);
    }
    if (verify->parsed()) {
      std::optional<fs::path> m;
      if (verify_masks) m = *verify_masks;
      return cmd_verify(original, augmented, manifest, m, as_json, io);
    }
    if (bench->parsed()) {
      const RunConfig cfg = resolve_config(cfg_path, overrides);
      return cmd_bench(images, masks, parse_seed(seed_text), workers,
                       iterations, cfg, as_json, io);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  err << app.help();
  return kExitFatal;
}

}  // namespace fbaug::cli
