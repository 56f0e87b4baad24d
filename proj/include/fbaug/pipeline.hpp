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

// Batch driver. Every image gets its own stream seeded from the global seed
// and its relative path, so outputs do not depend on worker count or on the
// order in which items are picked up.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "fbaug/augment.hpp"
#include "fbaug/codec.hpp"
#include "fbaug/errors.hpp"
#include "fbaug/serialize.hpp"

namespace fbaug {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = kFnvOffsetBasis;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t global_seed,
                                    std::string_view rel_path) noexcept {
  return global_seed ^ fnv1a64(rel_path);
}

struct DatasetPair {
  /// Image path relative to the image root, '/'-separated. Sort key and
  /// seed-derivation key.
  std::string rel_path;
  fs::path image_path;
  /// Absent only when discovery ran with skip_missing and found no mask.
  std::optional<fs::path> mask_path;
  /// Mask path relative to the mask root, '/'-separated.
  std::string mask_rel_path;

  friend bool operator==(const DatasetPair&, const DatasetPair&) = default;
};

inline constexpr std::string_view kImageExtensions[] = {".png", ".ppm"};
inline constexpr std::string_view kMaskExtensions[] = {".png", ".pgm"};

inline bool has_extension_in(const fs::path& p,
                             std::span<const std::string_view> exts) {
  const std::string ext = detail::lower_extension(p);
  return std::find(exts.begin(), exts.end(), ext) != exts.end();
}

/// Pairs each image under image_dir with the mask at the same relative stem
/// under mask_dir (.png preferred over .pgm). Sorted by relative path.
inline std::vector<DatasetPair> discover_pairs(const fs::path& image_dir,
                                               const fs::path& mask_dir,
                                               bool skip_missing = false) {
  if (!fs::is_directory(image_dir)) {
    throw MissingFileError("image directory not found: " + image_dir.string());
  }
  if (!fs::is_directory(mask_dir)) {
    throw MissingFileError("mask directory not found: " + mask_dir.string());
  }
  std::vector<DatasetPair> pairs;
  for (const auto& entry : fs::recursive_directory_iterator(image_dir)) {
    if (!entry.is_regular_file() ||
        !has_extension_in(entry.path(), kImageExtensions)) {
      continue;
    }
    DatasetPair pair;
    const fs::path rel = fs::relative(entry.path(), image_dir);
    pair.rel_path = rel.generic_string();
    pair.image_path = entry.path();
    for (std::string_view ext : kMaskExtensions) {
      fs::path candidate_rel = rel;
      candidate_rel.replace_extension(ext);
      if (fs::is_regular_file(mask_dir / candidate_rel)) {
        pair.mask_path = mask_dir / candidate_rel;
        pair.mask_rel_path = candidate_rel.generic_string();
        break;
      }
    }
    if (!pair.mask_path && !skip_missing) {
      fs::path stem = rel;
      stem.replace_extension();
      throw MissingMaskError("no mask for image '" + stem.generic_string() +
                             "' under " + mask_dir.string());
    }
    pairs.push_back(std::move(pair));
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const DatasetPair& a, const DatasetPair& b) {
              return a.rel_path < b.rel_path;
            });
  return pairs;
}

struct Failure {
  std::string path;
  std::string error;

  friend bool operator==(const Failure&, const Failure&) = default;
};

struct RunManifest {
  std::uint64_t global_seed = 0;
  RunConfig config;
  std::string image_dir;
  std::string mask_dir;
  std::size_t processed = 0;
  std::vector<Failure> failures;
  /// Keyed by image relative path.
  std::map<std::string, AugRecord> records;
  /// Mask relative path per processed image.
  std::map<std::string, std::string> mask_paths;

  std::size_t discovered() const noexcept {
    return processed + failures.size();
  }
};

inline constexpr const char* kManifestName = "manifest.json";

inline json manifest_to_json(const RunManifest& m) {
  json failures = json::array();
  for (const Failure& f : m.failures) {
    failures.push_back({{"path", f.path}, {"error", f.error}});
  }
  json records = json::object();
  for (const auto& [path, rec] : m.records) {
    json r = record_to_json(rec);
    if (auto it = m.mask_paths.find(path); it != m.mask_paths.end()) {
      r["mask"] = it->second;
    }
    records[path] = std::move(r);
  }
  return json{{"global_seed", seed_to_string(m.global_seed)},
              {"config", config_to_json(m.config)},
              {"image_dir", m.image_dir},
              {"mask_dir", m.mask_dir},
              {"processed", m.processed},
              {"failures", std::move(failures)},
              {"records", std::move(records)}};
}

inline RunManifest manifest_from_json(const json& j) {
  try {
    RunManifest m;
    m.global_seed = parse_seed(j.at("global_seed").get<std::string>());
    m.config = apply_config_json(j.at("config"));
    m.image_dir = j.value("image_dir", "");
    m.mask_dir = j.value("mask_dir", "");
    m.processed = j.at("processed").get<std::size_t>();
    for (const json& f : j.at("failures")) {
      m.failures.push_back(
          {f.at("path").get<std::string>(), f.at("error").get<std::string>()});
    }
    for (const auto& [path, r] : j.at("records").items()) {
      m.records[path] = record_from_json(r);
      if (r.contains("mask")) m.mask_paths[path] = r.at("mask");
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
}

inline RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open manifest: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

inline void write_manifest(const RunManifest& m, const fs::path& path) {
  const std::string text = manifest_to_json(m).dump(2) + "\n";
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                             text.size()));
}

/// Runs `fn(i)` for every i in [0, count) on `workers` threads. The first
/// exception thrown stops the remaining work and is rethrown on the caller.
inline void parallel_for(std::size_t count, int workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers < 1) throw InvalidArgumentError("workers must be >= 1");
  const auto threads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto loop = [&] {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };
  if (threads <= 1) {
    loop();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(loop);
  }
  if (error) std::rethrow_exception(error);
}

/// Result of augmenting a single pair, before any file is written.
struct ItemOutcome {
  std::optional<AugmentResult> result;
  std::string error;
};

/// Loads, validates and augments one pair. Load/validate/augment errors are
/// reported in the outcome, not thrown.
inline ItemOutcome augment_pair(const DatasetPair& pair, const RunConfig& cfg,
                                std::uint64_t global_seed,
                                StageTimes* times = nullptr) {
  ItemOutcome out;
  if (!pair.mask_path) {
    out.error = "missing mask";
    return out;
  }
  try {
    Image img;
    BinaryMask mask;
    {
      StageTimer timer(times ? &times->decode : nullptr);
      img = load_image(pair.image_path);
      mask = load_mask(*pair.mask_path, cfg.theta);
    }
    RngStream rng(derive_seed(global_seed, pair.rel_path));
    out.result = augment_one(img, mask, cfg.augment, rng, times);
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

struct DatasetRun {
  RunConfig config;
  std::uint64_t global_seed = 0;
  int workers = 1;
  fs::path out_dir;
  /// Recorded in the manifest so `verify` can find the masks again.
  std::string image_dir;
  std::string mask_dir;
};

/// Augments every pair and mirrors the input tree under run.out_dir, then
/// writes manifest.json there. Item-level failures are recorded; failing to
/// write into out_dir is fatal and throws.
inline RunManifest process_dataset(std::vector<DatasetPair> pairs,
                                   const DatasetRun& run) {
  run.config.augment.validate();
  std::sort(pairs.begin(), pairs.end(),
            [](const DatasetPair& a, const DatasetPair& b) {
              return a.rel_path < b.rel_path;
            });
  std::error_code ec;
  fs::create_directories(run.out_dir, ec);
  if (ec || !fs::is_directory(run.out_dir)) {
    throw WriteError("cannot create output directory " +
                     run.out_dir.string());
  }

  std::vector<ItemOutcome> outcomes(pairs.size());
  parallel_for(pairs.size(), run.workers, [&](std::size_t i) {
    ItemOutcome outcome = augment_pair(pairs[i], run.config, run.global_seed);
    if (outcome.result) {
      const fs::path dst = run.out_dir / fs::path(pairs[i].rel_path);
      std::error_code dir_ec;
      fs::create_directories(dst.parent_path(), dir_ec);
      save_image(outcome.result->image, dst);
      outcome.result->image = Image{};
    }
    outcomes[i] = std::move(outcome);
  });

  RunManifest manifest;
  manifest.global_seed = run.global_seed;
  manifest.config = run.config;
  manifest.image_dir = run.image_dir;
  manifest.mask_dir = run.mask_dir;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (outcomes[i].result) {
      ++manifest.processed;
      manifest.records[pairs[i].rel_path] = std::move(outcomes[i].result->record);
      manifest.mask_paths[pairs[i].rel_path] = pairs[i].mask_rel_path;
    } else {
      manifest.failures.push_back({pairs[i].rel_path, outcomes[i].error});
    }
  }
  write_manifest(manifest, run.out_dir / kManifestName);
  return manifest;
}

}  // namespace fbaug
