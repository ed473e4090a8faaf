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

#include <gtest/gtest.h>

#include <random>

#include "trajfm/error.hpp"
#include "trajfm/geo.hpp"

namespace trajfm::geo {
namespace {

// Reference values from PROJ (WGS84 UTM, explicit zone and hemisphere).
struct UtmRef {
  double lng, lat;
  int zone;
  bool north;
  double easting, northing;
};
constexpr UtmRef kRefs[] = {
    {104.0665, 30.5728, 48, true, 410485.7047800287, 3382629.9293906246},
    {108.9398, 34.3416, 49, true, 310494.9844291871, 3801955.457332173},
    {108.2, 34.0, 48, true, 795571.0689908485, 3766774.3784660725},  // forced zone
    {-70.6693, -33.4489, 19, false, 344846.72031010315, 6297700.155609685},
    {151.2093, -33.8688, 56, false, 334368.633648097, 6250948.345385009},
    {0.0005, 0.0, 31, true, 166077.15741874522, 0.0},
};

TEST(Utm, MatchesReferenceProjection) {
  for (const auto& r : kRefs) {
    const UtmCoord c = utm_project({r.lng, r.lat}, r.zone, r.north);
    EXPECT_NEAR(c.easting, r.easting, 1e-3) << r.lng << "," << r.lat;
    EXPECT_NEAR(c.northing, r.northing, 1e-3) << r.lng << "," << r.lat;
  }
}

TEST(Utm, StandardZoneSelection) {
  EXPECT_EQ(utm_zone_for(104.0665), 48);
  EXPECT_EQ(utm_zone_for(-180.0), 1);
  EXPECT_EQ(utm_zone_for(179.9), 60);
  const UtmCoord c = utm_project({-70.6693, -33.4489});
  EXPECT_EQ(c.zone, 19);
  EXPECT_FALSE(c.north);
}

TEST(Utm, RoundTripProperty) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lng(-180.0, 180.0), lat(-60.0, 60.0);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const LngLat p{lng(rng), lat(rng)};
    const LngLat back = utm_invert(utm_project(p));
    worst = std::max(worst, haversine_m(p, back));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Utm, ForcedZoneRoundTrip) {
  const UtmCoord c = utm_project({108.9398, 34.3416}, 48, true);
  EXPECT_GT(c.easting, 834000.0);  // outside the nominal 166-834 km band
  const LngLat back = utm_invert(c);
  EXPECT_LT(haversine_m(back, {108.9398, 34.3416}), 1e-3);
}

TEST(Utm, RejectsOutOfDomain) {
  EXPECT_THROW(utm_project({10.0, 85.0}), DataError);
  EXPECT_THROW(utm_project({10.0, -81.0}), DataError);
  EXPECT_THROW(utm_invert({-5.0, 1000.0, 31, true}), DataError);
  EXPECT_THROW(utm_invert({500000.0, 1.1e7, 31, true}), DataError);
}

TEST(Normalize, ScaleDefinition) {
  RegionConfig region{{104.0665, 30.5728}};
  const UtmCoord center = utm_project(region.center);
  UtmCoord c = center;
  c.easting += 4000.0;
  c.northing -= 2000.0;
  const NormXY n = normalize_xy(c, region);
  EXPECT_NEAR(n.x, 1.0, 1e-12);
  EXPECT_NEAR(n.y, -0.5, 1e-12);
  const UtmCoord back = denormalize_xy({1.0, -0.5}, region);
  EXPECT_NEAR(back.easting, center.easting + 4000.0, 1e-9);
  EXPECT_NEAR(back.northing, center.northing - 2000.0, 1e-9);
}

TEST(Normalize, ZoneMismatchIsAnError) {
  RegionConfig region{{104.0665, 30.5728}};
  EXPECT_THROW(normalize_xy(utm_project({108.9398, 34.3416}), region), DataError);
}

TEST(Region, CenterMapsToOriginAndBack) {
  const Region region(RegionConfig{{104.0665, 30.5728}});
  const NormXY o = region.to_norm(region.config().center);
  EXPECT_NEAR(o.x, 0.0, 1e-12);
  EXPECT_NEAR(o.y, 0.0, 1e-12);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const NormXY n{u(rng), u(rng)};
    const NormXY back = region.to_norm(region.to_lnglat(n));
    EXPECT_NEAR(back.x, n.x, 1e-9);
    EXPECT_NEAR(back.y, n.y, 1e-9);
  }
}

TEST(Region, RejectsBadConfig) {
  EXPECT_THROW(Region(RegionConfig{{104.0, 30.0}, 0.0, 4000.0}), DataError);
  EXPECT_THROW(Region(RegionConfig{{200.0, 30.0}}), DataError);
}

TEST(Haversine, ReferenceDistances) {
  EXPECT_NEAR(haversine_m({0.0, 0.0}, {1.0, 0.0}), 111194.92664455874, 1e-6);
  EXPECT_NEAR(haversine_m({104.0665, 30.5728}, {104.0765, 30.5828}), 1467.2743796353575, 1e-6);
  EXPECT_EQ(haversine_m({12.0, 34.0}, {12.0, 34.0}), 0.0);
}

TEST(Haversine, SymmetricAndTriangleInequality) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lng(-180.0, 180.0), lat(-89.0, 89.0);
  for (int i = 0; i < 500; ++i) {
    const LngLat a{lng(rng), lat(rng)}, b{lng(rng), lat(rng)}, c{lng(rng), lat(rng)};
    EXPECT_NEAR(haversine_m(a, b), haversine_m(b, a), 1e-6);
    EXPECT_LE(haversine_m(a, c), haversine_m(a, b) + haversine_m(b, c) + 1e-6);
  }
}

}  // namespace
}  // namespace trajfm::geo
