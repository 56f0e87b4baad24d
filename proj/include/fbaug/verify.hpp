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

// Checks of the stochastic and structural contracts of the augmentation:
// gate frequency, noise coverage, shuffle integrity, and re-verification of
// a finished run from its manifest.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fbaug/augment.hpp"
#include "fbaug/codec.hpp"
#include "fbaug/image.hpp"
#include "fbaug/pipeline.hpp"
#include "fbaug/rng.hpp"

namespace fbaug {

struct GateReport {
  std::size_t trials = 0;
  std::size_t applied = 0;
  double rho = 0.0;
  bool in_bounds = false;

  double fraction() const noexcept {
    return trials ? static_cast<double>(applied) / trials : 0.0;
  }
  /// 3-sigma binomial half-width around rho.
  double tolerance() const noexcept {
    return trials ? 3.0 * std::sqrt(rho * (1.0 - rho) / trials) : 0.0;
  }
};

/// Draws the gate once per trial, each on a fresh stream seeded by
/// derive_seed(seed, decimal trial index).
inline GateReport estimate_gate_rate(const AugmentConfig& cfg,
                                     std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidArgumentError("trials must be >= 1");
  cfg.validate();
  GateReport report;
  report.trials = trials;
  report.rho = cfg.rho;
  for (std::size_t i = 0; i < trials; ++i) {
    RngStream rng(derive_seed(seed, std::to_string(i)));
    if (gate_passes(rng.uniform01(), cfg.rho)) ++report.applied;
  }
  report.in_bounds =
      std::abs(report.fraction() - report.rho) <= report.tolerance();
  return report;
}

namespace detail {

template <typename R>
std::vector<std::vector<typename R::value_type>> grid_cells(const R& img,
                                                            const GridGeometry& g) {
  std::vector<std::vector<typename R::value_type>> cells;
  cells.reserve(g.cells());
  const std::size_t run = static_cast<std::size_t>(g.cell_w) * R::kChannels;
  for (int k = 0; k < g.cells(); ++k) {
    const int x0 = (k % g.division) * g.cell_w;
    const int y0 = (k / g.division) * g.cell_h;
    std::vector<typename R::value_type> cell;
    cell.reserve(run * g.cell_h);
    for (int r = 0; r < g.cell_h; ++r) {
      auto src = img.row(y0 + r).subspan(img.offset(x0, 0), run);
      cell.insert(cell.end(), src.begin(), src.end());
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace detail

/// True iff `shuffled` holds the same multiset of grid cells as `original`
/// and the residual right/bottom borders are bitwise identical.
template <typename R>
bool verify_shuffle_integrity(const R& original, const R& shuffled,
                              int division) {
  require_same_shape(original, shuffled, "shuffle integrity");
  const GridGeometry g = grid_geometry(original, division);
  const int gw = g.cell_w * division;
  const int gh = g.cell_h * division;
  for (int y = 0; y < original.height(); ++y) {
    for (int x = (y < gh ? gw : 0); x < original.width(); ++x) {
      for (int c = 0; c < R::kChannels; ++c) {
        if (original.at(x, y, c) != shuffled.at(x, y, c)) return false;
      }
    }
  }
  auto a = detail::grid_cells(original, g);
  auto b = detail::grid_cells(shuffled, g);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

struct CoverageReport {
  double nominal_area = 0.0;
  std::int64_t rect_area_sum = 0;
  std::int64_t max_rect_area = 0;
  /// Pixels inside the union of noise rects.
  std::int64_t union_altered = 0;
  /// Of those, pixels under the foreground mask.
  std::int64_t fg_altered = 0;
  /// Pixels changed by the noise pass outside every rect (must be 0).
  std::int64_t changed_outside = 0;
  bool applied = false;
  bool bounds_ok = false;
};

/// Replays the gate and the noise pass of augment_one for `seed` and checks
///   fg_altered <= union_altered <= sum of rect areas,
///   A in [area_low, area_high] * Area(I),
///   sum of rect areas in [A, A + max rect area),
///   no pixel outside the rects changed.
inline CoverageReport noise_coverage_report(const Image& img,
                                            const BinaryMask& mask,
                                            const AugmentConfig& cfg,
                                            std::uint64_t seed) {
  validate_pair(img, mask);
  cfg.validate();
  CoverageReport rep;
  RngStream rng(seed);
  rep.applied = gate_passes(rng.uniform01(), cfg.rho);
  if (!rep.applied || !cfg.enable_fpn) {
    rep.bounds_ok = true;
    return rep;
  }
  const double area = static_cast<double>(img.pixel_count());
  rep.nominal_area = sample_noise_area(rng, cfg, area);
  const auto rects =
      select_noise_patches(rng, cfg, img.width(), img.height(), rep.nominal_area);
  const Image noised = apply_patch_noise(img, rects, rng, cfg);

  BinaryMask covered(img.width(), img.height());
  for (const Rect& r : rects) {
    rep.rect_area_sum += r.area();
    rep.max_rect_area = std::max(rep.max_rect_area, r.area());
    for (int y = r.y; y < r.y + r.h; ++y) {
      for (int x = r.x; x < r.x + r.w; ++x) covered.at(x, y) = 1;
    }
  }
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (covered.at(x, y)) {
        ++rep.union_altered;
        if (mask.at(x, y)) ++rep.fg_altered;
      } else if (img.at(x, y, 0) != noised.at(x, y, 0) ||
                 img.at(x, y, 1) != noised.at(x, y, 1) ||
                 img.at(x, y, 2) != noised.at(x, y, 2)) {
        ++rep.changed_outside;
      }
    }
  }
  const double cum = static_cast<double>(rep.rect_area_sum);
  rep.bounds_ok = rep.fg_altered <= rep.union_altered &&
                  rep.union_altered <= rep.rect_area_sum &&
                  rep.nominal_area >= cfg.area_low * area &&
                  rep.nominal_area <= cfg.area_high * area &&
                  cum >= rep.nominal_area &&
                  (rects.empty() ||
                   cum < rep.nominal_area + static_cast<double>(rep.max_rect_area)) &&
                  rep.changed_outside == 0;
  return rep;
}

/// Structural checks of one augmented output against its original, mask and
/// record. Returns an empty string when everything holds, else the first
/// violation.
inline std::string check_augmented(const Image& original, const BinaryMask& mask,
                                   const Image& augmented,
                                   const AugRecord& rec) {
  if (original.width() != augmented.width() ||
      original.height() != augmented.height()) {
    return "size " + shape_string(augmented) + " differs from original " +
           shape_string(original);
  }
  if (!rec.applied) {
    if (!rec.noise_rects.empty() || rec.grid_division || rec.permutation) {
      return "record not applied but carries rects/grid/permutation";
    }
    return augmented == original ? "" : "passthrough output differs from input";
  }
  Image background = original;
  if (rec.grid_division.has_value() != rec.permutation.has_value()) {
    return "grid division and permutation must be both present or both absent";
  }
  if (rec.permutation) {
    const int d = *rec.grid_division;
    std::vector<int> sorted = *rec.permutation;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] != static_cast<int>(i)) return "permutation is not a bijection";
    }
    try {
      background = apply_grid_permutation(original, d, *rec.permutation);
    } catch (const Error& e) {
      return std::string("bad grid record: ") + e.what();
    }
    if (!verify_shuffle_integrity(original, background, d)) {
      return "shuffle integrity violated";
    }
  }
  for (const Rect& r : rec.noise_rects) {
    if (r.x < 0 || r.y < 0 || r.w < 1 || r.h < 1 || r.x + r.w > original.width() ||
        r.y + r.h > original.height()) {
      return "noise rect out of bounds";
    }
  }
  for (int y = 0; y < original.height(); ++y) {
    for (int x = 0; x < original.width(); ++x) {
      const Image& expected_src = mask.at(x, y) ? original : background;
      if (mask.at(x, y) &&
          std::any_of(rec.noise_rects.begin(), rec.noise_rects.end(),
                      [&](const Rect& r) { return r.contains(x, y); })) {
        continue;
      }
      for (int c = 0; c < 3; ++c) {
        if (augmented.at(x, y, c) != expected_src.at(x, y, c)) {
          return std::string(mask.at(x, y) ? "foreground" : "background") +
                 " pixel (" + std::to_string(x) + "," + std::to_string(y) +
                 ") violates the composite gate";
        }
      }
    }
  }
  return "";
}

struct VerifyReport {
  std::size_t checked = 0;
  std::vector<Failure> failures;

  bool ok() const noexcept { return failures.empty(); }
};

/// Re-verifies a run: for each manifest record, recomputes the output from
/// the recorded seed and compares bytes and record, then runs the
/// structural checks independently of the recomputation.
inline VerifyReport verify_run(const fs::path& original_dir,
                               const fs::path& augmented_dir,
                               const RunManifest& manifest,
                               std::optional<fs::path> mask_dir = std::nullopt) {
  const fs::path masks = mask_dir ? *mask_dir : fs::path(manifest.mask_dir);
  VerifyReport report;
  for (const auto& [rel, rec] : manifest.records) {
    ++report.checked;
    auto fail = [&](const std::string& why) {
      report.failures.push_back({rel, why});
    };
    try {
      if (rec.stream_seed != derive_seed(manifest.global_seed, rel)) {
        fail("stream seed does not match derive_seed(global_seed, path)");
        continue;
      }
      auto mask_it = manifest.mask_paths.find(rel);
      if (mask_it == manifest.mask_paths.end()) {
        fail("record has no mask path");
        continue;
      }
      const Image original = load_image(original_dir / fs::path(rel));
      const BinaryMask mask =
          load_mask(masks / fs::path(mask_it->second), manifest.config.theta);
      const Image augmented = load_image(augmented_dir / fs::path(rel));

      const AugmentResult expected = augment_with_seed(
          original, mask, manifest.config.augment, rec.stream_seed);
      if (!(expected.record == rec)) {
        fail("record differs from recomputation");
        continue;
      }
      if (std::string why = check_augmented(original, mask, augmented, rec);
          !why.empty()) {
        fail(why);
        continue;
      }
      if (!(expected.image == augmented)) {
        fail("output bytes differ from recomputation");
      }
    } catch (const Error& e) {
      fail(e.what());
    }
  }
  return report;
}

}  // namespace fbaug
