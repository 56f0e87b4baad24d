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

// JSON forms of the run configuration and of augmentation records.
// Seeds travel as unsigned decimal strings so they survive 53-bit readers.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "fbaug/augment.hpp"
#include "fbaug/errors.hpp"
#include "fbaug/image.hpp"

namespace fbaug {

using json = nlohmann::json;

/// Everything a run is parameterized by apart from the seed and paths.
struct RunConfig {
  AugmentConfig augment;
  double theta = kDefaultTheta;
  bool skip_missing = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

inline constexpr std::string_view kConfigKeys[] = {
    "rho",         "area_low",            "area_high",
    "noise_mean",  "noise_sigma",         "patch_side_min_frac",
    "patch_side_max_frac", "grid_divisions", "enable_fpn",
    "enable_bps",  "theta",               "skip_missing"};

inline std::string seed_to_string(std::uint64_t seed) {
  return std::to_string(seed);
}

inline std::uint64_t parse_seed(std::string_view text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ConfigError("invalid seed '" + std::string(text) +
                      "': expected an unsigned 64-bit decimal integer");
  }
  return v;
}

/// Sorted, duplicate-free grid division set.
inline std::vector<int> canonical_divisions(std::vector<int> divisions) {
  std::sort(divisions.begin(), divisions.end());
  divisions.erase(std::unique(divisions.begin(), divisions.end()),
                  divisions.end());
  return divisions;
}

inline json config_to_json(const RunConfig& cfg) {
  const AugmentConfig& a = cfg.augment;
  return json{{"rho", a.rho},
              {"area_low", a.area_low},
              {"area_high", a.area_high},
              {"noise_mean", a.noise_mean},
              {"noise_sigma", a.noise_sigma},
              {"patch_side_min_frac", a.patch_side_min_frac},
              {"patch_side_max_frac", a.patch_side_max_frac},
              {"grid_divisions", a.grid_divisions},
              {"enable_fpn", a.enable_fpn},
              {"enable_bps", a.enable_bps},
              {"theta", cfg.theta},
              {"skip_missing", cfg.skip_missing}};
}

namespace detail {

template <typename T>
T json_field(const json& j, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!j.is_number()) throw ConfigError("");
    }
    return j.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected;
/// absent keys keep their value from `base`.
inline RunConfig apply_config_json(const json& j, RunConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kConfigKeys), std::end(kConfigKeys), key) ==
        std::end(kConfigKeys)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  AugmentConfig& a = base.augment;
  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = detail::json_field<double>(j.at(key), key);
  };
  auto flag = [&](const char* key, bool& dst) {
    if (j.contains(key)) dst = detail::json_field<bool>(j.at(key), key);
  };
  num("rho", a.rho);
  num("area_low", a.area_low);
  num("area_high", a.area_high);
  num("noise_mean", a.noise_mean);
  num("noise_sigma", a.noise_sigma);
  num("patch_side_min_frac", a.patch_side_min_frac);
  num("patch_side_max_frac", a.patch_side_max_frac);
  if (j.contains("grid_divisions")) {
    const json& g = j.at("grid_divisions");
    if (!g.is_array()) {
      throw ConfigError("config key 'grid_divisions' must be an array");
    }
    std::vector<int> divs;
    for (const json& d : g) {
      if (!d.is_number_integer()) {
        throw ConfigError("grid_divisions entries must be integers");
      }
      divs.push_back(d.get<int>());
    }
    a.grid_divisions = canonical_divisions(std::move(divs));
  }
  flag("enable_fpn", a.enable_fpn);
  flag("enable_bps", a.enable_bps);
  num("theta", base.theta);
  flag("skip_missing", base.skip_missing);
  a.validate();
  if (!(base.theta >= 0.0)) throw ConfigError("theta must be >= 0");
  return base;
}

inline RunConfig load_config_file(const std::filesystem::path& path,
                                  RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return apply_config_json(j, std::move(base));
}

inline json record_to_json(const AugRecord& r) {
  json rects = json::array();
  for (const Rect& rc : r.noise_rects) {
    rects.push_back({{"x", rc.x}, {"y", rc.y}, {"w", rc.w}, {"h", rc.h}});
  }
  return json{
      {"gate_value", r.gate_value},
      {"applied", r.applied},
      {"sampled_area", r.sampled_area},
      {"noise_rects", std::move(rects)},
      {"grid_division",
       r.grid_division ? json(*r.grid_division) : json(nullptr)},
      {"permutation", r.permutation ? json(*r.permutation) : json(nullptr)},
      {"stream_seed", seed_to_string(r.stream_seed)}};
}

inline AugRecord record_from_json(const json& j) {
  try {
    AugRecord r;
    r.gate_value = j.at("gate_value").get<double>();
    r.applied = j.at("applied").get<bool>();
    r.sampled_area = j.at("sampled_area").get<double>();
    for (const json& rc : j.at("noise_rects")) {
      r.noise_rects.push_back({rc.at("x").get<int>(), rc.at("y").get<int>(),
                               rc.at("w").get<int>(), rc.at("h").get<int>()});
    }
    if (!j.at("grid_division").is_null()) {
      r.grid_division = j.at("grid_division").get<int>();
    }
    if (!j.at("permutation").is_null()) {
      r.permutation = j.at("permutation").get<std::vector<int>>();
    }
    r.stream_seed = parse_seed(j.at("stream_seed").get<std::string>());
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed augmentation record: ") +
                      e.what());
  }
}

}  // namespace fbaug
