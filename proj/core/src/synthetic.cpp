// Copyright 2026 The TrajFM Authors.
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

#include <array>
#include <cmath>
#include <cstdio>
#include <random>

#include "trajfm/data.hpp"
#include "trajfm/error.hpp"

namespace trajfm::data {
namespace {

constexpr std::array<const char*, 8> kCategories = {
    "restaurant", "park", "school", "hospital", "shopping mall", "office tower",
    "hotel",      "metro station"};
constexpr std::array<const char*, 6> kNameStems = {"Golden", "River", "Lotus",
                                                   "Panda",  "Jade",  "Cedar"};

std::string fmt(const char* pattern, long a, long b = 0) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

// Seconds-of-day at which commuter congestion slows traffic.
bool rush_hour(double unix_t) {
  const auto local =
      static_cast<std::int64_t>(std::floor(unix_t)) + kCivilOffsetSeconds;
  const std::int64_t hod = ((local % 86400) + 86400) % 86400 / 3600;
  return (hod >= 7 && hod < 10) || (hod >= 17 && hod < 20);
}

}  // namespace

SynthConfig SynthConfig::from_config(const KvConfig& cfg) {
  SynthConfig c;
  c.center.lng = cfg.get_double("center_lng", c.center.lng);
  c.center.lat = cfg.get_double("center_lat", c.center.lat);
  c.scale = cfg.get_double("scale", c.scale);
  c.grid_size = static_cast<int>(cfg.get_int("grid_size", c.grid_size));
  c.cell_spacing_m = cfg.get_double("cell_spacing_m", c.cell_spacing_m);
  c.poi_count = static_cast<int>(cfg.get_int("poi_count", c.poi_count));
  c.trajectory_count =
      static_cast<int>(cfg.get_int("trajectory_count", c.trajectory_count));
  c.speed_min_mps = cfg.get_double("speed_min_mps", c.speed_min_mps);
  c.speed_max_mps = cfg.get_double("speed_max_mps", c.speed_max_mps);
  c.min_hops = static_cast<int>(cfg.get_int("min_hops", c.min_hops));
  c.max_hops = static_cast<int>(cfg.get_int("max_hops", c.max_hops));
  c.turn_prob = cfg.get_double("turn_prob", c.turn_prob);
  c.start_time = cfg.get_int("start_time", c.start_time);
  c.span_days = cfg.get_double("span_days", c.span_days);
  c.id_prefix = cfg.get_string("id_prefix", c.id_prefix);
  return c;
}

KvConfig SynthConfig::to_config() const {
  KvConfig cfg;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", center.lng);
  cfg.set("center_lng", buf);
  std::snprintf(buf, sizeof buf, "%.9f", center.lat);
  cfg.set("center_lat", buf);
  cfg.set_double("scale", scale);
  cfg.set("grid_size", std::to_string(grid_size));
  cfg.set_double("cell_spacing_m", cell_spacing_m);
  cfg.set("poi_count", std::to_string(poi_count));
  cfg.set("trajectory_count", std::to_string(trajectory_count));
  cfg.set_double("speed_min_mps", speed_min_mps);
  cfg.set_double("speed_max_mps", speed_max_mps);
  cfg.set("min_hops", std::to_string(min_hops));
  cfg.set("max_hops", std::to_string(max_hops));
  cfg.set_double("turn_prob", turn_prob);
  cfg.set("start_time", std::to_string(start_time));
  cfg.set_double("span_days", span_days);
  cfg.set("id_prefix", id_prefix);
  return cfg;
}

void SynthConfig::validate() const {
  if (!center.valid()) throw DataError("synthetic config: invalid center");
  if (grid_size < 2) throw DataError("synthetic config: grid_size must be >= 2");
  if (trajectory_count <= 0) {
    throw DataError("synthetic config: trajectory_count must be positive");
  }
  if (poi_count <= 0 || poi_count > grid_size * grid_size) {
    throw DataError("synthetic config: poi_count must be in [1, grid_size^2]");
  }
  if (!(cell_spacing_m > 0.0)) throw DataError("synthetic config: cell_spacing_m <= 0");
  if (!(speed_min_mps > 0.0) || speed_max_mps < speed_min_mps) {
    throw DataError("synthetic config: need 0 < speed_min_mps <= speed_max_mps");
  }
  if (min_hops < 1 || max_hops < min_hops || min_hops > 2 * (grid_size - 1)) {
    throw DataError("synthetic config: hop range infeasible for the grid");
  }
  if (!(turn_prob >= 0.0 && turn_prob <= 1.0)) {
    throw DataError("synthetic config: turn_prob must be in [0, 1]");
  }
  if (!(span_days > 0.0) || start_time < 0) {
    throw DataError("synthetic config: bad time window");
  }
  if (!(scale > 0.0)) throw DataError("synthetic config: scale must be positive");
}

Dataset generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  auto uniform_int = [&rng](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  Dataset ds;
  ds.region.center = cfg.center;
  ds.region.scale_x = cfg.scale;
  ds.region.scale_y = cfg.scale;
  const geo::Region region(ds.region);

  const int g = cfg.grid_size;
  const double half = 0.5 * static_cast<double>(g - 1);
  auto node_loc = [&](int i, int j) {
    geo::UtmCoord c = region.center_utm();
    c.easting += (static_cast<double>(i) - half) * cfg.cell_spacing_m;
    c.northing += (static_cast<double>(j) - half) * cfg.cell_spacing_m;
    return geo::utm_invert(c);
  };

  // POIs on distinct random nodes.
  std::vector<int> nodes(static_cast<std::size_t>(g * g));
  for (int k = 0; k < g * g; ++k) nodes[static_cast<std::size_t>(k)] = k;
  for (int k = 0; k < cfg.poi_count; ++k) {
    const int pick = uniform_int(k, g * g - 1);
    std::swap(nodes[static_cast<std::size_t>(k)], nodes[static_cast<std::size_t>(pick)]);
    const int node = nodes[static_cast<std::size_t>(k)];
    const int i = node % g;
    const int j = node / g;
    Poi p;
    p.id = cfg.id_prefix + fmt("-poi-%05ld", k);
    p.loc = node_loc(i, j);
    const auto cat = static_cast<std::size_t>(uniform_int(0, kCategories.size() - 1));
    const auto stem = static_cast<std::size_t>(uniform_int(0, kNameStems.size() - 1));
    p.category = kCategories[cat];
    p.name = std::string(kNameStems[stem]) + " " + p.category + fmt(" %ld", k);
    p.address = fmt("%ld Avenue %ld", i + 1, j + 1);
    p.desc = poi_description(p.name, p.category, p.address);
    ds.pois.push_back(std::move(p));
  }

  const double span_s = cfg.span_days * 86400.0;
  for (int n = 0; n < cfg.trajectory_count; ++n) {
    int oi = 0, oj = 0, di = 0, dj = 0;
    for (;;) {
      oi = uniform_int(0, g - 1);
      oj = uniform_int(0, g - 1);
      di = uniform_int(0, g - 1);
      dj = uniform_int(0, g - 1);
      const int hops = std::abs(di - oi) + std::abs(dj - oj);
      if (hops >= cfg.min_hops && hops <= cfg.max_hops) break;
    }
    Trajectory t;
    t.id = cfg.id_prefix + fmt("-%06ld", n);
    double now = static_cast<double>(cfg.start_time) +
                 std::floor(uniform(0.0, span_s));
    // Congestion narrows the speed draw to the lower half of the range.
    const double vmax = rush_hour(now)
                            ? 0.5 * (cfg.speed_min_mps + cfg.speed_max_mps)
                            : cfg.speed_max_mps;
    int i = oi, j = oj;
    t.points.push_back({node_loc(i, j), now});
    // Monotone route that keeps its heading at each intersection unless it
    // turns (probability turn_prob) or the current axis is exhausted.
    bool along_x = uniform_int(1, std::abs(di - oi) + std::abs(dj - oj)) <= std::abs(di - oi);
    while (i != di || j != dj) {
      const int rx = std::abs(di - i);
      const int ry = std::abs(dj - j);
      if ((along_x && rx == 0) || (!along_x && ry == 0)) {
        along_x = !along_x;
      } else if (rx > 0 && ry > 0 && uniform(0.0, 1.0) < cfg.turn_prob) {
        along_x = !along_x;
      }
      if (along_x) {
        i += (di > i) ? 1 : -1;
      } else {
        j += (dj > j) ? 1 : -1;
      }
      const double speed = uniform(cfg.speed_min_mps, vmax);
      now += std::ceil(cfg.cell_spacing_m / speed);
      t.points.push_back({node_loc(i, j), now});
    }
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

}  // namespace trajfm::data
