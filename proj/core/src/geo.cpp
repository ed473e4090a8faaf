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

#include "trajfm/geo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "trajfm/error.hpp"

namespace trajfm::geo {
namespace {

constexpr double kA = 6378137.0;
constexpr double kF = 1.0 / 298.257223563;
constexpr double kK0 = 0.9996;
constexpr double kFalseEasting = 500000.0;
constexpr double kFalseNorthingSouth = 10000000.0;
constexpr double kDeg = std::numbers::pi / 180.0;

// Series constants of the Kruger expansion in the third flattening n.
struct Series {
  double e;   // first eccentricity
  double e2;
  double rect;  // k0 * rectifying radius A
  std::array<double, 6> alpha;
  std::array<double, 6> beta;
};

Series make_series() {
  const double n = kF / (2.0 - kF);
  const double n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n, n6 = n5 * n;
  Series s{};
  s.e2 = kF * (2.0 - kF);
  s.e = std::sqrt(s.e2);
  s.rect = kK0 * kA / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
  s.alpha = {
      n / 2 - 2 * n2 / 3 + 5 * n3 / 16 + 41 * n4 / 180 - 127 * n5 / 288 +
          7891 * n6 / 37800,
      13 * n2 / 48 - 3 * n3 / 5 + 557 * n4 / 1440 + 281 * n5 / 630 -
          1983433 * n6 / 1935360,
      61 * n3 / 240 - 103 * n4 / 140 + 15061 * n5 / 26880 +
          167603 * n6 / 181440,
      49561 * n4 / 161280 - 179 * n5 / 168 + 6601661 * n6 / 7257600,
      34729 * n5 / 80640 - 3418889 * n6 / 1995840,
      212378941 * n6 / 319334400,
  };
  s.beta = {
      n / 2 - 2 * n2 / 3 + 37 * n3 / 96 - n4 / 360 - 81 * n5 / 512 +
          96199 * n6 / 604800,
      n2 / 48 + n3 / 15 - 437 * n4 / 1440 + 46 * n5 / 105 -
          1118711 * n6 / 3870720,
      17 * n3 / 480 - 37 * n4 / 840 - 209 * n5 / 4480 + 5569 * n6 / 90720,
      4397 * n4 / 161280 - 11 * n5 / 504 - 830251 * n6 / 7257600,
      4583 * n5 / 161280 - 108847 * n6 / 3991680,
      20648693 * n6 / 638668800,
  };
  return s;
}

const Series& series() {
  static const Series s = make_series();
  return s;
}

double central_meridian(int zone) { return (zone - 1) * 6.0 - 180.0 + 3.0; }

// tan of conformal latitude from tan of geodetic latitude.
double taupf(double tau, double e) {
  const double tau1 = std::hypot(1.0, tau);
  const double sig = std::sinh(e * std::atanh(e * tau / tau1));
  return std::hypot(1.0, sig) * tau - sig * tau1;
}

// Newton inversion of taupf.
double tauf(double taup, double e, double e2) {
  const double e2m = 1.0 - e2;
  double tau = taup / e2m;
  for (int i = 0; i < 8; ++i) {
    const double tau1 = std::hypot(1.0, tau);
    const double tp = taupf(tau, e);
    const double dtau = (taup - tp) * (1.0 + e2m * tau * tau) /
                        (e2m * tau1 * std::hypot(1.0, tp));
    tau += dtau;
    if (std::abs(dtau) < 1e-15 * std::max(1.0, std::abs(tau))) break;
  }
  return tau;
}

}  // namespace

bool LngLat::valid() const noexcept {
  return std::isfinite(lng) && std::isfinite(lat) && lng >= -180.0 &&
         lng <= 180.0 && lat >= -90.0 && lat <= 90.0;
}

void RegionConfig::validate() const {
  if (!center.valid()) throw DataError("region center is not a valid coordinate");
  if (!(scale_x > 0.0) || !(scale_y > 0.0) || !std::isfinite(scale_x) ||
      !std::isfinite(scale_y)) {
    throw DataError("region scales must be positive");
  }
}

int utm_zone_for(double lng) {
  int zone = static_cast<int>(std::floor((lng + 180.0) / 6.0)) + 1;
  return std::clamp(zone, 1, 60);
}

UtmCoord utm_project(const LngLat& p) {
  return utm_project(p, utm_zone_for(p.lng), p.lat >= 0.0);
}

UtmCoord utm_project(const LngLat& p, int zone, bool north) {
  if (!p.valid()) throw DataError("invalid coordinate");
  if (p.lat < -80.0 || p.lat > 84.0) {
    std::ostringstream os;
    os << "latitude " << p.lat << " outside the UTM domain [-80, 84]";
    throw DataError(os.str());
  }
  if (zone < 1 || zone > 60) throw DataError("UTM zone out of range");
  const Series& s = series();

  double dlng = p.lng - central_meridian(zone);
  dlng = std::remainder(dlng, 360.0);
  const double phi = p.lat * kDeg;
  const double lam = dlng * kDeg;

  const double taup = taupf(std::tan(phi), s.e);
  const double xip = std::atan2(taup, std::cos(lam));
  const double etap = std::asinh(std::sin(lam) / std::hypot(taup, std::cos(lam)));

  double xi = xip;
  double eta = etap;
  for (int j = 1; j <= 6; ++j) {
    const double a = s.alpha[j - 1];
    xi += a * std::sin(2 * j * xip) * std::cosh(2 * j * etap);
    eta += a * std::cos(2 * j * xip) * std::sinh(2 * j * etap);
  }
  UtmCoord c;
  c.zone = zone;
  c.north = north;
  c.easting = kFalseEasting + s.rect * eta;
  c.northing = s.rect * xi + (north ? 0.0 : kFalseNorthingSouth);
  return c;
}

LngLat utm_invert(const UtmCoord& c) {
  if (c.zone < 1 || c.zone > 60) throw DataError("UTM zone out of range");
  if (!std::isfinite(c.easting) || !(c.easting > 0.0) || !(c.easting < 1.0e6)) {
    std::ostringstream os;
    os << "easting " << c.easting << " outside the invertible range (0, 1e6) m";
    throw DataError(os.str());
  }
  if (!std::isfinite(c.northing) || c.northing < 0.0 || c.northing > 1.0e7) {
    std::ostringstream os;
    os << "northing " << c.northing << " outside [0, 1e7] m";
    throw DataError(os.str());
  }
  const Series& s = series();
  const double xi = (c.northing - (c.north ? 0.0 : kFalseNorthingSouth)) / s.rect;
  const double eta = (c.easting - kFalseEasting) / s.rect;

  double xip = xi;
  double etap = eta;
  for (int j = 1; j <= 6; ++j) {
    const double b = s.beta[j - 1];
    xip -= b * std::sin(2 * j * xi) * std::cosh(2 * j * eta);
    etap -= b * std::cos(2 * j * xi) * std::sinh(2 * j * eta);
  }
  const double sxip = std::sin(xip);
  const double cxip = std::cos(xip);
  const double shetap = std::sinh(etap);
  const double taup = sxip / std::hypot(shetap, cxip);
  const double lam = std::atan2(shetap, cxip);
  const double tau = tauf(taup, s.e, s.e2);

  LngLat out;
  out.lat = std::atan(tau) / kDeg;
  out.lng = std::remainder(central_meridian(c.zone) + lam / kDeg, 360.0);
  return out;
}

NormXY normalize_xy(const UtmCoord& c, const RegionConfig& region) {
  region.validate();
  const UtmCoord center = utm_project(region.center);
  if (c.zone != center.zone || c.north != center.north) {
    std::ostringstream os;
    os << "coordinate in zone " << c.zone << (c.north ? "N" : "S")
       << " but region center is in zone " << center.zone
       << (center.north ? "N" : "S");
    throw DataError(os.str());
  }
  return {(c.easting - center.easting) / region.scale_x,
          (c.northing - center.northing) / region.scale_y};
}

UtmCoord denormalize_xy(const NormXY& n, const RegionConfig& region) {
  UtmCoord c = utm_project(region.center);
  c.easting += n.x * region.scale_x;
  c.northing += n.y * region.scale_y;
  return c;
}

double haversine_m(const LngLat& a, const LngLat& b) {
  const double phi1 = a.lat * kDeg;
  const double phi2 = b.lat * kDeg;
  const double dphi = (b.lat - a.lat) * kDeg;
  const double dlam = (b.lng - a.lng) * kDeg;
  const double sdphi = std::sin(dphi / 2.0);
  const double sdlam = std::sin(dlam / 2.0);
  double h = sdphi * sdphi + std::cos(phi1) * std::cos(phi2) * sdlam * sdlam;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

Region::Region(RegionConfig config) : config_(config) {
  config_.validate();
  center_utm_ = utm_project(config_.center);
}

UtmCoord Region::project(const LngLat& p) const {
  return utm_project(p, center_utm_.zone, center_utm_.north);
}

NormXY Region::to_norm(const LngLat& p) const {
  const UtmCoord c = project(p);
  return {(c.easting - center_utm_.easting) / config_.scale_x,
          (c.northing - center_utm_.northing) / config_.scale_y};
}

LngLat Region::to_lnglat(const NormXY& n) const {
  UtmCoord c = center_utm_;
  c.easting += n.x * config_.scale_x;
  c.northing += n.y * config_.scale_y;
  return utm_invert(c);
}

}  // namespace trajfm::geo
