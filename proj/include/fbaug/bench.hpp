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

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "fbaug/augment.hpp"
#include "fbaug/codec.hpp"
#include "fbaug/pipeline.hpp"

namespace fbaug {

struct ThroughputReport {
  std::size_t images = 0;
  std::size_t failures = 0;
  int workers = 1;
  int iterations = 1;
  double wall_seconds = 0.0;
  double images_per_second = 0.0;
  /// Summed over workers, so may exceed wall time when workers > 1.
  StageTimes stages;
  /// FNV-1a of each encoded output from the last pass, keyed by path.
  std::map<std::string, std::uint64_t> output_digests;
};

/// End-to-end rate (read+decode, FPN, BPS, composite, PNG/PPM encode) over
/// `iterations` full passes. Encoded outputs are hashed, not written.
inline ThroughputReport measure_throughput(const std::vector<DatasetPair>& pairs,
                                           const RunConfig& cfg,
                                           std::uint64_t global_seed,
                                           int workers, int iterations) {
  if (pairs.empty()) throw InvalidArgumentError("no image pairs to benchmark");
  if (iterations < 1) throw InvalidArgumentError("iterations must be >= 1");
  cfg.augment.validate();

  ThroughputReport rep;
  rep.workers = workers;
  rep.iterations = iterations;
  std::vector<StageTimes> per_item(pairs.size());
  std::vector<std::uint64_t> digests(pairs.size());
  std::vector<char> failed(pairs.size());

  const auto start = std::chrono::steady_clock::now();
  for (int it = 0; it < iterations; ++it) {
    parallel_for(pairs.size(), workers, [&](std::size_t i) {
      StageTimes& t = per_item[i];
      ItemOutcome outcome = augment_pair(pairs[i], cfg, global_seed, &t);
      if (!outcome.result) {
        failed[i] = 1;
        return;
      }
      StageTimer timer(&t.encode);
      const Bytes encoded =
          encode_image(outcome.result->image, format_for_path(pairs[i].image_path));
      digests[i] = fnv1a64(std::string_view(
          reinterpret_cast<const char*>(encoded.data()), encoded.size()));
    });
  }
  rep.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    rep.stages += per_item[i];
    if (failed[i]) {
      ++rep.failures;
    } else {
      rep.output_digests[pairs[i].rel_path] = digests[i];
    }
  }
  rep.images = pairs.size() * static_cast<std::size_t>(iterations);
  rep.images_per_second =
      rep.wall_seconds > 0.0 ? static_cast<double>(rep.images) / rep.wall_seconds
                             : 0.0;
  return rep;
}

}  // namespace fbaug
