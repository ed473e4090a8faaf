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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "trajfm/data.hpp"
#include "trajfm/error.hpp"

namespace trajfm::data {
namespace {

constexpr double kMinBucketM = 100.0;
constexpr double kMPerDeg = geo::kEarthRadiusM * std::numbers::pi / 180.0;
// Queries farther than this many buckets outside the POI extent use a linear
// scan instead of ring expansion.
constexpr std::int64_t kMaxRingMargin = 64;

std::uint64_t key(std::int64_t cx, std::int64_t cy) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cx)) << 32) |
         static_cast<std::uint32_t>(cy);
}

bool better(double d, const Poi& p, double best_d, const Poi* best) {
  if (best == nullptr) return true;
  if (d != best_d) return d < best_d;
  return p.id < best->id;
}

}  // namespace

std::size_t nearest_poi_linear(const std::vector<Poi>& pois, const geo::LngLat& p) {
  if (pois.empty()) throw DataError("nearest POI query on an empty set");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pois.size(); ++i) {
    const double d = geo::haversine_m(p, pois[i].loc);
    if (d < best_d || (d == best_d && pois[i].id < pois[best].id)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

PoiIndex::PoiIndex(std::vector<Poi> pois) : pois_(std::move(pois)) {
  if (pois_.empty()) return;
  double min_lat = 90, max_lat = -90, min_lng = 180, max_lng = -180;
  for (const auto& p : pois_) {
    min_lat = std::min(min_lat, p.loc.lat);
    max_lat = std::max(max_lat, p.loc.lat);
    min_lng = std::min(min_lng, p.loc.lng);
    max_lng = std::max(max_lng, p.loc.lng);
  }
  origin_lat_ = 0.5 * (min_lat + max_lat);
  origin_lng_ = 0.5 * (min_lng + max_lng);
  m_per_deg_lat_ = kMPerDeg;
  m_per_deg_lng_ = kMPerDeg * std::cos(origin_lat_ * std::numbers::pi / 180.0);

  auto build = [this](double bucket) {
    bucket_m_ = bucket;
    buckets_.clear();
    min_cx_ = min_cy_ = std::numeric_limits<std::int64_t>::max();
    max_cx_ = max_cy_ = std::numeric_limits<std::int64_t>::min();
    for (std::size_t i = 0; i < pois_.size(); ++i) {
      const Cell c = cell_of(pois_[i].loc);
      buckets_[key(c.cx, c.cy)].push_back(i);
      min_cx_ = std::min(min_cx_, c.cx);
      max_cx_ = std::max(max_cx_, c.cx);
      min_cy_ = std::min(min_cy_, c.cy);
      max_cy_ = std::max(max_cy_, c.cy);
    }
  };

  // Mean nearest-neighbor spacing, estimated on at most 256 evenly strided
  // POIs.
  double mean_nn = 0.0;
  if (pois_.size() > 1) {
    const std::size_t stride = std::max<std::size_t>(1, pois_.size() / 256);
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < pois_.size(); i += stride) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < pois_.size(); ++j) {
        if (j != i) best = std::min(best, geo::haversine_m(pois_[i].loc, pois_[j].loc));
      }
      sum += best;
      ++counted;
    }
    mean_nn = sum / static_cast<double>(counted);
  }
  build(std::max(kMinBucketM, mean_nn));
}

PoiIndex::Cell PoiIndex::cell_of(const geo::LngLat& p) const {
  const double x = (p.lng - origin_lng_) * m_per_deg_lng_;
  const double y = (p.lat - origin_lat_) * m_per_deg_lat_;
  return {static_cast<std::int64_t>(std::floor(x / bucket_m_)),
          static_cast<std::int64_t>(std::floor(y / bucket_m_))};
}

std::size_t PoiIndex::nearest_index(const geo::LngLat& p) const {
  if (pois_.empty()) throw DataError("nearest POI query on an empty index");
  const Cell q = cell_of(p);
  if (q.cx < min_cx_ - kMaxRingMargin || q.cx > max_cx_ + kMaxRingMargin ||
      q.cy < min_cy_ - kMaxRingMargin || q.cy > max_cy_ + kMaxRingMargin ||
      std::abs(p.lat) > 80.0) {
    return nearest_poi_linear(pois_, p);
  }

  // Lower bound on haversine distance per unit of planar (equirectangular)
  // distance over the searched area.
  const double lat_span =
      std::max({std::abs(p.lat), std::abs(origin_lat_)}) +
      (static_cast<double>(max_cy_ - min_cy_ + 2 * kMaxRingMargin) * bucket_m_) /
          m_per_deg_lat_;
  const double cos_ratio = std::cos(std::min(89.0, lat_span) * std::numbers::pi / 180.0) /
                           std::cos(origin_lat_ * std::numbers::pi / 180.0);
  const double scale = 0.99 * std::min(1.0, cos_ratio);

  const Poi* best = nullptr;
  std::size_t best_i = 0;
  double best_d = std::numeric_limits<double>::infinity();
  auto visit = [&](std::int64_t cx, std::int64_t cy) {
    auto it = buckets_.find(key(cx, cy));
    if (it == buckets_.end()) return;
    for (std::size_t i : it->second) {
      const double d = geo::haversine_m(p, pois_[i].loc);
      if (better(d, pois_[i], best_d, best)) {
        best = &pois_[i];
        best_i = i;
        best_d = d;
      }
    }
  };

  const std::int64_t max_ring =
      std::max({q.cx - min_cx_, max_cx_ - q.cx, q.cy - min_cy_, max_cy_ - q.cy}) + 1;
  for (std::int64_t k = 0; k <= max_ring; ++k) {
    if (k == 0) {
      visit(q.cx, q.cy);
    } else {
      for (std::int64_t dx = -k; dx <= k; ++dx) {
        visit(q.cx + dx, q.cy - k);
        visit(q.cx + dx, q.cy + k);
      }
      for (std::int64_t dy = -k + 1; dy <= k - 1; ++dy) {
        visit(q.cx - k, q.cy + dy);
        visit(q.cx + k, q.cy + dy);
      }
    }
    // Anything outside rings 0..k is at least k buckets away in the plane.
    if (best != nullptr && best_d < static_cast<double>(k) * bucket_m_ * scale) break;
  }
  return best_i;
}

const Poi& PoiIndex::nearest(const geo::LngLat& p) const {
  return pois_[nearest_index(p)];
}

}  // namespace trajfm::data
