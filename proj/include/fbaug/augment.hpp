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

// Dual-region augmentation kernels.
//
//   I_fg = image with Gaussian noise patches (foreground patch noise)
//   I_bg = image cut into a d x d grid whose cells are permuted
//          (background patch shuffling)
//   out  = mask ? I_fg : I_bg
//
// Random draws happen in a fixed order per call to augment_one:
//   1. gate value p1
//   2. noise area ratio u                       (FPN enabled only)
//   3. per patch: side, x, y                    (FPN enabled only)
//   4. per patch, row-major, per channel: noise (FPN enabled only)
//   5. grid division index                      (BPS enabled only)
//   6. Fisher-Yates swaps, i = N-1 .. 1         (BPS enabled only)

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fbaug/errors.hpp"
#include "fbaug/image.hpp"
#include "fbaug/rng.hpp"

namespace fbaug {

struct AugmentConfig {
  double rho = 0.5;
  double area_low = 0.02;
  double area_high = 0.40;
  double noise_mean = 0.5;
  double noise_sigma = 0.25;
  double patch_side_min_frac = 1.0 / 16.0;
  double patch_side_max_frac = 1.0 / 4.0;
  std::vector<int> grid_divisions = {2, 4, 8};
  bool enable_fpn = true;
  bool enable_bps = true;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (!(rho >= 0.0 && rho <= 1.0)) fail("rho must lie in [0, 1]");
    if (!(area_low >= 0.0 && area_low <= area_high && area_high <= 1.0)) {
      fail("need 0 <= area_low <= area_high <= 1");
    }
    if (!std::isfinite(noise_mean)) fail("noise_mean must be finite");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
      fail("noise_sigma must be >= 0");
    }
    if (!(patch_side_min_frac > 0.0 &&
          patch_side_min_frac <= patch_side_max_frac &&
          patch_side_max_frac <= 1.0)) {
      fail("need 0 < patch_side_min_frac <= patch_side_max_frac <= 1");
    }
    if (grid_divisions.empty()) fail("grid_divisions must not be empty");
    for (int d : grid_divisions) {
      if (d < 1) fail("every grid division must be >= 1");
    }
  }

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  std::int64_t area() const noexcept {
    return static_cast<std::int64_t>(w) * h;
  }
  bool contains(int px, int py) const noexcept {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Provenance of one augment_one call.
struct AugRecord {
  double gate_value = 0.0;
  bool applied = false;
  double sampled_area = 0.0;
  std::vector<Rect> noise_rects;
  std::optional<int> grid_division;
  std::optional<std::vector<int>> permutation;
  std::uint64_t stream_seed = 0;

  friend bool operator==(const AugRecord&, const AugRecord&) = default;
};

/// Seconds spent per stage. Decode and encode are filled by the pipeline.
struct StageTimes {
  double decode = 0.0;
  double fpn = 0.0;
  double bps = 0.0;
  double composite = 0.0;
  double encode = 0.0;

  StageTimes& operator+=(const StageTimes& o) noexcept {
    decode += o.decode;
    fpn += o.fpn;
    bps += o.bps;
    composite += o.composite;
    encode += o.encode;
    return *this;
  }
};

/// Adds the lifetime of the object to `*slot`; inert when slot is null.
class StageTimer {
 public:
  explicit StageTimer(double* slot) noexcept
      : slot_(slot), start_(slot ? std::chrono::steady_clock::now()
                                 : std::chrono::steady_clock::time_point{}) {}
  StageTimer(const StageTimer&) = delete;
  StageTimer& operator=(const StageTimer&) = delete;
  ~StageTimer() {
    if (slot_ != nullptr) {
      *slot_ += std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start_)
                    .count();
    }
  }

 private:
  double* slot_;
  std::chrono::steady_clock::time_point start_;
};

struct AugmentResult {
  Image image;
  AugRecord record;
};

template <typename R>
struct ShuffleResult {
  R image;
  /// Output cell k (row-major over the grid) holds input cell permutation[k].
  std::vector<int> permutation;
};

/// Augment iff p1 < rho; p1 is drawn from [0, 1).
constexpr bool gate_passes(double p1, double rho) noexcept { return p1 < rho; }

inline double sample_noise_area(RngStream& rng, const AugmentConfig& cfg,
                                double image_area) {
  return rng.uniform(cfg.area_low, cfg.area_high) * image_area;
}

/// Square patches placed fully inside the image, appended until their
/// cumulative nominal area first reaches `target_area`.
inline std::vector<Rect> select_noise_patches(RngStream& rng,
                                              const AugmentConfig& cfg, int w,
                                              int h, double target_area) {
  std::vector<Rect> rects;
  if (w < 1 || h < 1) {
    throw InvalidArgumentError("noise patches need a non-empty image");
  }
  const int short_side = std::min(w, h);
  double covered = 0.0;
  while (covered < target_area) {
    const double frac =
        rng.uniform(cfg.patch_side_min_frac, cfg.patch_side_max_frac);
    const int side = std::clamp(
        static_cast<int>(std::lround(frac * short_side)), 1, short_side);
    const int x = static_cast<int>(rng.uniform_int(0, w - side));
    const int y = static_cast<int>(rng.uniform_int(0, h - side));
    rects.push_back({x, y, side, side});
    covered += static_cast<double>(side) * side;
  }
  return rects;
}

/// Maps a normalized value to 8 bits, clamping to [0, 1] and rounding half up.
inline std::uint8_t quantize_unit(double v) noexcept {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

/// Replaces every channel of every covered pixel with an independent draw of
/// clamp(N(noise_mean, noise_sigma), 0, 1). Later rects overwrite earlier ones.
inline Image apply_patch_noise(const Image& img, const std::vector<Rect>& rects,
                               RngStream& rng, const AugmentConfig& cfg) {
  Image out = img;
  for (const Rect& r : rects) {
    if (r.x < 0 || r.y < 0 || r.w < 1 || r.h < 1 ||
        r.x + r.w > img.width() || r.y + r.h > img.height()) {
      throw InvalidArgumentError("noise rect outside image bounds");
    }
    for (int y = r.y; y < r.y + r.h; ++y) {
      auto row = out.row(y);
      for (std::size_t i = static_cast<std::size_t>(r.x) * 3;
           i < static_cast<std::size_t>(r.x + r.w) * 3; ++i) {
        row[i] = quantize_unit(rng.normal(cfg.noise_mean, cfg.noise_sigma));
      }
    }
  }
  return out;
}

/// Geometry of a d x d grid anchored at the top-left corner.
struct GridGeometry {
  int division;
  int cell_w;
  int cell_h;

  int cells() const noexcept { return division * division; }
};

template <typename R>
GridGeometry grid_geometry(const R& img, int division) {
  if (division < 1) {
    throw InvalidArgumentError("grid division must be >= 1");
  }
  if (division > std::min(img.width(), img.height())) {
    throw InvalidArgumentError(
        "grid division " + std::to_string(division) +
        " exceeds the short side of a " + shape_string(img) + " image");
  }
  return {division, img.width() / division, img.height() / division};
}

/// Rebuilds an image from `src` with grid cell k taken from src cell
/// permutation[k]. Residual right/bottom borders are copied unchanged.
template <typename R>
R apply_grid_permutation(const R& src, int division,
                         const std::vector<int>& permutation) {
  const GridGeometry g = grid_geometry(src, division);
  if (permutation.size() != static_cast<std::size_t>(g.cells())) {
    throw InvalidArgumentError("permutation length does not match grid");
  }
  R out = src;
  const std::size_t run = static_cast<std::size_t>(g.cell_w) * R::kChannels;
  for (int k = 0; k < g.cells(); ++k) {
    const int from = permutation[k];
    if (from < 0 || from >= g.cells()) {
      throw InvalidArgumentError("permutation index out of range");
    }
    const int dx = (k % division) * g.cell_w;
    const int dy = (k / division) * g.cell_h;
    const int sx = (from % division) * g.cell_w;
    const int sy = (from / division) * g.cell_h;
    for (int r = 0; r < g.cell_h; ++r) {
      auto src_row = src.row(sy + r).subspan(src.offset(sx, 0), run);
      auto dst_row = out.row(dy + r).subspan(out.offset(dx, 0), run);
      std::copy(src_row.begin(), src_row.end(), dst_row.begin());
    }
  }
  return out;
}

template <typename R>
ShuffleResult<R> shuffle_patches(const R& img, int division, RngStream& rng) {
  const GridGeometry g = grid_geometry(img, division);
  std::vector<int> perm(g.cells());
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = g.cells() - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  R out = apply_grid_permutation(img, division, perm);
  return {std::move(out), std::move(perm)};
}

/// out = mask ? fg : bg, per pixel.
inline Image composite(const Image& fg, const Image& bg,
                       const BinaryMask& mask) {
  require_same_shape(fg, bg, "composite foreground/background");
  require_same_shape(fg, mask, "composite image/mask");
  Image out = bg;
  auto dst = out.data();
  auto src = fg.data();
  auto bits = mask.data();
  for (std::size_t p = 0; p < bits.size(); ++p) {
    if (bits[p]) {
      dst[3 * p] = src[3 * p];
      dst[3 * p + 1] = src[3 * p + 1];
      dst[3 * p + 2] = src[3 * p + 2];
    }
  }
  return out;
}

inline AugmentResult augment_one(const Image& img, const BinaryMask& mask,
                                 const AugmentConfig& cfg, RngStream& rng,
                                 StageTimes* times = nullptr) {
  validate_pair(img, mask);
  cfg.validate();

  AugRecord rec;
  rec.stream_seed = rng.seed();
  rec.gate_value = rng.uniform01();
  rec.applied = gate_passes(rec.gate_value, cfg.rho);
  if (!rec.applied) return {img, std::move(rec)};

  std::optional<Image> noised;
  if (cfg.enable_fpn) {
    StageTimer timer(times ? &times->fpn : nullptr);
    rec.sampled_area =
        sample_noise_area(rng, cfg, static_cast<double>(img.pixel_count()));
    rec.noise_rects = select_noise_patches(rng, cfg, img.width(), img.height(),
                                           rec.sampled_area);
    noised = apply_patch_noise(img, rec.noise_rects, rng, cfg);
  }

  std::optional<Image> shuffled;
  if (cfg.enable_bps) {
    StageTimer timer(times ? &times->bps : nullptr);
    const auto& divs = cfg.grid_divisions;
    const int division = divs[rng.below(divs.size())];
    auto sh = shuffle_patches(img, division, rng);
    rec.grid_division = division;
    rec.permutation = std::move(sh.permutation);
    shuffled = std::move(sh.image);
  }

  StageTimer timer(times ? &times->composite : nullptr);
  Image out = composite(noised ? *noised : img, shuffled ? *shuffled : img,
                        mask);
  return {std::move(out), std::move(rec)};
}

/// Fresh stream per call; the entry point for stateless callers.
inline AugmentResult augment_with_seed(const Image& img,
                                       const BinaryMask& mask,
                                       const AugmentConfig& cfg,
                                       std::uint64_t seed) {
  RngStream rng(seed);
  return augment_one(img, mask, cfg, rng);
}

}  // namespace fbaug
