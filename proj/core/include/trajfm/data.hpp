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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajfm/geo.hpp"
#include "trajfm/kv_config.hpp"

namespace trajfm::data {

struct TrajPoint {
  geo::LngLat loc;
  double t = 0.0;  // unix seconds
};

struct Trajectory {
  std::string id;
  std::vector<TrajPoint> points;

  std::size_t size() const noexcept { return points.size(); }
  double departure() const { return points.empty() ? 0.0 : points.front().t; }
  double duration() const {
    return points.empty() ? 0.0 : points.back().t - points.front().t;
  }
};

struct Poi {
  std::string id;
  geo::LngLat loc;
  std::string name;
  std::string category;
  std::string address;
  std::string desc;  // name + "; " + category + "; " + address
};

std::string poi_description(const std::string& name, const std::string& category,
                            const std::string& address);

// Temporal modality of one point: day of week (Monday = 0), hour of day,
// minute of hour in fixed UTC+8 civil time, and minutes since departure.
struct TemporalFeatures {
  double dow = 0.0;
  double hod = 0.0;
  double moh = 0.0;
  double dt_min = 0.0;

  std::array<double, 4> as_array() const { return {dow, hod, moh, dt_min}; }
  friend bool operator==(const TemporalFeatures&, const TemporalFeatures&) = default;
};

inline constexpr std::int64_t kCivilOffsetSeconds = 8 * 3600;
inline constexpr std::size_t kMinTrajectoryLength = 5;
inline constexpr std::size_t kMaxTrajectoryLength = 120;

TemporalFeatures expand_temporal(const Trajectory& t, std::size_t i);

// Keeps indices 0, 3, 6, ... and always the final point.
Trajectory three_hop_resample(const Trajectory& t);

// Retains trajectories with 5 <= n <= 120, preserving order.
std::vector<Trajectory> filter_length(const std::vector<Trajectory>& ts);

// Exact nearest-POI search by haversine distance over a uniform bucket grid
// with ring expansion. Ties resolve to the lexicographically smallest id.
class PoiIndex {
 public:
  PoiIndex() = default;
  explicit PoiIndex(std::vector<Poi> pois);

  bool empty() const noexcept { return pois_.empty(); }
  std::size_t size() const noexcept { return pois_.size(); }
  const std::vector<Poi>& pois() const noexcept { return pois_; }
  double bucket_size_m() const noexcept { return bucket_m_; }

  const Poi& nearest(const geo::LngLat& p) const;
  std::size_t nearest_index(const geo::LngLat& p) const;

 private:
  struct Cell {
    std::int64_t cx;
    std::int64_t cy;
  };
  Cell cell_of(const geo::LngLat& p) const;

  std::vector<Poi> pois_;
  double bucket_m_ = 100.0;
  double origin_lat_ = 0.0;
  double origin_lng_ = 0.0;
  double m_per_deg_lat_ = 0.0;
  double m_per_deg_lng_ = 0.0;
  std::int64_t min_cx_ = 0, max_cx_ = 0, min_cy_ = 0, max_cy_ = 0;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

// Linear-scan reference for PoiIndex::nearest.
std::size_t nearest_poi_linear(const std::vector<Poi>& pois, const geo::LngLat& p);

enum class Split : std::uint8_t { kTrain, kValidation, kTest };

const char* split_name(Split s);
Split parse_split(const std::string& s);

struct Dataset {
  geo::RegionConfig region;
  std::vector<Trajectory> trajectories;
  std::vector<Poi> pois;
  std::vector<Split> split;  // parallel to trajectories, empty until split

  std::vector<Trajectory> subset(Split s) const;
};

// Sorts by departure (ties by id) and assigns the first 80% to train, the next
// 10% to validation and the rest to test.
Dataset split_chronological(Dataset ds);

// CSV I/O. Trajectory header: traj_id,seq,lng,lat,timestamp. POI header:
// poi_id,lng,lat,name,category,address.
std::vector<Trajectory> load_trajectories_csv(const std::filesystem::path& path);
std::vector<Poi> load_pois_csv(const std::filesystem::path& path);
void write_trajectories_csv(const std::filesystem::path& path,
                            const std::vector<Trajectory>& ts);
void write_pois_csv(const std::filesystem::path& path, const std::vector<Poi>& pois);

geo::RegionConfig region_from_config(const KvConfig& cfg);
KvConfig region_to_config(const geo::RegionConfig& region);

// Dataset directory layout: region.cfg, pois.csv, meta.cfg, and either
// trajectories.csv (raw) or train.csv / validation.csv / test.csv
// (preprocessed, meta.cfg has `preprocessed = true`).
namespace files {
inline constexpr const char* kRegion = "region.cfg";
inline constexpr const char* kPois = "pois.csv";
inline constexpr const char* kMeta = "meta.cfg";
inline constexpr const char* kTrajectories = "trajectories.csv";
inline constexpr const char* kPoiAnnotations = "poi_annotations.csv";
}  // namespace files

bool is_preprocessed_dir(const std::filesystem::path& dir);
// Writes a raw dataset (split ignored) or, when ds.split is populated, the
// three split files plus a traj_id,seq,poi_id nearest-POI annotation table.
void save_dataset_dir(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset_dir(const std::filesystem::path& dir);

// Three-hop resampling, length filtering and the chronological 8:1:1 split.
// A dataset that already carries a split is returned unchanged.
Dataset preprocess(Dataset raw);

struct SynthConfig {
  geo::LngLat center{104.0665, 30.5728};
  double scale = geo::kDefaultScale;
  int grid_size = 40;
  double cell_spacing_m = 200.0;
  int poi_count = 400;
  int trajectory_count = 2000;
  double speed_min_mps = 5.0;
  double speed_max_mps = 15.0;
  int min_hops = 18;
  int max_hops = 60;
  double turn_prob = 0.15;  // per intersection, while both axes have hops left
  std::int64_t start_time = 1538323200;  // 2018-10-01 00:00 UTC+8
  double span_days = 14.0;
  std::string id_prefix = "t";

  static SynthConfig from_config(const KvConfig& cfg);
  KvConfig to_config() const;
  void validate() const;
};

// Seeded generator: turn-averse monotone walks between random grid nodes of
// a g x g road grid centered on the region center. One raw point per grid
// node, integer-second timestamps.
Dataset generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace trajfm::data
