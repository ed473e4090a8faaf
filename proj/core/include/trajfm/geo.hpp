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

#include <optional>

namespace trajfm::geo {

struct LngLat {
  double lng = 0.0;  // degrees, [-180, 180]
  double lat = 0.0;  // degrees, [-90, 90]

  bool valid() const noexcept;
  friend bool operator==(const LngLat&, const LngLat&) = default;
};

struct UtmCoord {
  double easting = 0.0;   // meters, false easting 500 km on the central meridian
  double northing = 0.0;  // meters, false northing 10,000 km in the south
  int zone = 0;           // 1..60
  bool north = true;
};

// Normalized planar coordinates relative to a region center.
struct NormXY {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const NormXY&, const NormXY&) = default;
};

inline constexpr double kDefaultScale = 4000.0;
inline constexpr double kEarthRadiusM = 6371000.0;

struct RegionConfig {
  LngLat center;
  double scale_x = kDefaultScale;
  double scale_y = kDefaultScale;

  void validate() const;  // throws DataError
};

// Zone that contains a longitude (standard 6-degree bands, no Norway/Svalbard
// exceptions).
int utm_zone_for(double lng);

// Forward transverse Mercator on WGS84 via the 6th-order Kruger series.
// Throws DataError outside the UTM latitude band [-80, 84].
UtmCoord utm_project(const LngLat& p);

// Same, but in an explicitly chosen zone and hemisphere (forced-zone
// projection).
UtmCoord utm_project(const LngLat& p, int zone, bool north);

// Inverse projection. Throws DataError when easting is outside (0, 1e6) m or
// northing outside [0, 1e7] m.
LngLat utm_invert(const UtmCoord& c);

// Requires c.zone/c.north to match the projected center; throws DataError
// otherwise.
NormXY normalize_xy(const UtmCoord& c, const RegionConfig& region);
UtmCoord denormalize_xy(const NormXY& n, const RegionConfig& region);

double haversine_m(const LngLat& a, const LngLat& b);

// A region with its center projected once. Every point is projected in the
// center's zone and hemisphere.
class Region {
 public:
  explicit Region(RegionConfig config);

  const RegionConfig& config() const noexcept { return config_; }
  const UtmCoord& center_utm() const noexcept { return center_utm_; }

  UtmCoord project(const LngLat& p) const;
  NormXY to_norm(const LngLat& p) const;
  LngLat to_lnglat(const NormXY& n) const;

 private:
  RegionConfig config_;
  UtmCoord center_utm_;
};

}  // namespace trajfm::geo
