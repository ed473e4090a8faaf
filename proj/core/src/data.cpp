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

#include "trajfm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "trajfm/error.hpp"

namespace trajfm::data {
namespace {

// Splits one CSV record; supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string where(const std::filesystem::path& path, int lineno) {
  return path.string() + ":" + std::to_string(lineno) + ": ";
}

double parse_real(const std::string& s, const std::filesystem::path& path, int lineno,
                  const char* column) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw DataError(where(path, lineno) + "bad " + column + " '" + s + "'");
  }
  return v;
}

std::int64_t parse_integer(const std::string& s, const std::filesystem::path& path,
                           int lineno, const char* column) {
  std::int64_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) {
    throw DataError(where(path, lineno) + "bad " + column + " '" + s + "'");
  }
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<int, std::vector<std::string>>> rows;  // (line, fields)
};

CsvTable read_csv(const std::filesystem::path& path,
                  const std::vector<std::string>& required) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      if (lineno == 1 && line.size() >= 3 &&
          line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
      }
      table.header = split_csv(line);
      for (const auto& col : required) {
        if (std::find(table.header.begin(), table.header.end(), col) ==
            table.header.end()) {
          throw DataError(where(path, lineno) + "missing column '" + col + "'");
        }
      }
      have_header = true;
      continue;
    }
    auto fields = split_csv(line);
    if (fields.size() != table.header.size()) {
      throw DataError(where(path, lineno) + "expected " +
                      std::to_string(table.header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    table.rows.emplace_back(lineno, std::move(fields));
  }
  return table;
}

std::size_t column(const CsvTable& t, const std::string& name) {
  return static_cast<std::size_t>(
      std::find(t.header.begin(), t.header.end(), name) - t.header.begin());
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::string poi_description(const std::string& name, const std::string& category,
                            const std::string& address) {
  return name + "; " + category + "; " + address;
}

TemporalFeatures expand_temporal(const Trajectory& t, std::size_t i) {
  if (i >= t.points.size()) throw DataError("temporal index out of range");
  const double ts = t.points[i].t;
  const auto local = static_cast<std::int64_t>(std::floor(ts)) + kCivilOffsetSeconds;
  const std::int64_t days = floor_div(local, 86400);
  const std::int64_t sod = local - days * 86400;
  TemporalFeatures f;
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  f.dow = static_cast<double>(((days + 3) % 7 + 7) % 7);
  f.hod = static_cast<double>(sod / 3600);
  f.moh = static_cast<double>((sod % 3600) / 60);
  f.dt_min = (ts - t.points.front().t) / 60.0;
  return f;
}

Trajectory three_hop_resample(const Trajectory& t) {
  Trajectory out;
  out.id = t.id;
  const std::size_t n = t.points.size();
  for (std::size_t i = 0; i < n; i += 3) out.points.push_back(t.points[i]);
  if (n > 0 && (n - 1) % 3 != 0) out.points.push_back(t.points.back());
  return out;
}

std::vector<Trajectory> filter_length(const std::vector<Trajectory>& ts) {
  std::vector<Trajectory> out;
  for (const auto& t : ts) {
    if (t.size() >= kMinTrajectoryLength && t.size() <= kMaxTrajectoryLength) {
      out.push_back(t);
    }
  }
  return out;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation" || s == "val") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split '" + s + "'");
}

std::vector<Trajectory> Dataset::subset(Split s) const {
  if (split.size() != trajectories.size()) {
    throw DataError("dataset has no split assignment");
  }
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (split[i] == s) out.push_back(trajectories[i]);
  }
  return out;
}

Dataset split_chronological(Dataset ds) {
  std::stable_sort(ds.trajectories.begin(), ds.trajectories.end(),
                   [](const Trajectory& a, const Trajectory& b) {
                     if (a.departure() != b.departure()) {
                       return a.departure() < b.departure();
                     }
                     return a.id < b.id;
                   });
  const std::size_t n = ds.trajectories.size();
  const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  ds.split.assign(n, Split::kTest);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) {
      ds.split[i] = Split::kTrain;
    } else if (i < std::min(n, n_train + n_val)) {
      ds.split[i] = Split::kValidation;
    }
  }
  return ds;
}

std::vector<Trajectory> load_trajectories_csv(const std::filesystem::path& path) {
  const CsvTable table =
      read_csv(path, {"traj_id", "seq", "lng", "lat", "timestamp"});
  const std::size_t c_id = column(table, "traj_id");
  const std::size_t c_seq = column(table, "seq");
  const std::size_t c_lng = column(table, "lng");
  const std::size_t c_lat = column(table, "lat");
  const std::size_t c_ts = column(table, "timestamp");

  struct Row {
    std::int64_t seq;
    int line;
    TrajPoint p;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Row>> groups;
  for (const auto& [lineno, f] : table.rows) {
    Row r;
    r.line = lineno;
    r.seq = parse_integer(f[c_seq], path, lineno, "seq");
    r.p.loc.lng = parse_real(f[c_lng], path, lineno, "lng");
    r.p.loc.lat = parse_real(f[c_lat], path, lineno, "lat");
    r.p.t = static_cast<double>(parse_integer(f[c_ts], path, lineno, "timestamp"));
    if (r.seq < 0) throw DataError(where(path, lineno) + "negative seq");
    if (!r.p.loc.valid()) {
      throw DataError(where(path, lineno) + "coordinate out of range (lng " +
                      f[c_lng] + ", lat " + f[c_lat] + ")");
    }
    if (r.p.t < 0) throw DataError(where(path, lineno) + "negative timestamp");
    auto [it, inserted] = groups.try_emplace(f[c_id]);
    if (inserted) order.push_back(f[c_id]);
    it->second.push_back(r);
  }

  std::vector<Trajectory> out;
  out.reserve(order.size());
  for (const auto& id : order) {
    auto& rows = groups[id];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.seq < b.seq; });
    Trajectory t;
    t.id = id;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].seq == rows[i - 1].seq) {
        throw DataError(where(path, rows[i].line) + "duplicate seq " +
                        std::to_string(rows[i].seq) + " in trajectory " + id);
      }
      if (i > 0 && rows[i].p.t < rows[i - 1].p.t) {
        throw DataError(where(path, rows[i].line) +
                        "timestamp decreases within trajectory " + id);
      }
      t.points.push_back(rows[i].p);
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Poi> load_pois_csv(const std::filesystem::path& path) {
  const CsvTable table =
      read_csv(path, {"poi_id", "lng", "lat", "name", "category", "address"});
  const std::size_t c_id = column(table, "poi_id");
  const std::size_t c_lng = column(table, "lng");
  const std::size_t c_lat = column(table, "lat");
  const std::size_t c_name = column(table, "name");
  const std::size_t c_cat = column(table, "category");
  const std::size_t c_addr = column(table, "address");
  std::unordered_set<std::string> seen;
  std::vector<Poi> out;
  for (const auto& [lineno, f] : table.rows) {
    Poi p;
    p.id = f[c_id];
    if (p.id.empty()) throw DataError(where(path, lineno) + "empty poi_id");
    if (!seen.insert(p.id).second) {
      throw DataError(where(path, lineno) + "duplicate poi_id '" + p.id + "'");
    }
    p.loc.lng = parse_real(f[c_lng], path, lineno, "lng");
    p.loc.lat = parse_real(f[c_lat], path, lineno, "lat");
    if (!p.loc.valid()) throw DataError(where(path, lineno) + "coordinate out of range");
    p.name = f[c_name];
    p.category = f[c_cat];
    p.address = f[c_addr];
    p.desc = poi_description(p.name, p.category, p.address);
    out.push_back(std::move(p));
  }
  return out;
}

void write_trajectories_csv(const std::filesystem::path& path,
                            const std::vector<Trajectory>& ts) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "traj_id,seq,lng,lat,timestamp\n";
  char buf[64];
  for (const auto& t : ts) {
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      const auto& p = t.points[i];
      out << csv_field(t.id) << ',' << i << ',';
      std::snprintf(buf, sizeof buf, "%.9f,%.9f", p.loc.lng, p.loc.lat);
      out << buf << ',' << static_cast<std::int64_t>(std::llround(p.t)) << '\n';
    }
  }
  if (!out) throw DataError("write failed: " + path.string());
}

void write_pois_csv(const std::filesystem::path& path, const std::vector<Poi>& pois) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "poi_id,lng,lat,name,category,address\n";
  char buf[64];
  for (const auto& p : pois) {
    std::snprintf(buf, sizeof buf, "%.9f,%.9f", p.loc.lng, p.loc.lat);
    out << csv_field(p.id) << ',' << buf << ',' << csv_field(p.name) << ','
        << csv_field(p.category) << ',' << csv_field(p.address) << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

geo::RegionConfig region_from_config(const KvConfig& cfg) {
  geo::RegionConfig r;
  r.center.lng = cfg.get_double("center_lng", r.center.lng);
  r.center.lat = cfg.get_double("center_lat", r.center.lat);
  r.scale_x = cfg.get_double("scale_x", r.scale_x);
  r.scale_y = cfg.get_double("scale_y", r.scale_y);
  r.validate();
  return r;
}

KvConfig region_to_config(const geo::RegionConfig& region) {
  KvConfig cfg;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", region.center.lng);
  cfg.set("center_lng", buf);
  std::snprintf(buf, sizeof buf, "%.9f", region.center.lat);
  cfg.set("center_lat", buf);
  std::snprintf(buf, sizeof buf, "%.6f", region.scale_x);
  cfg.set("scale_x", buf);
  std::snprintf(buf, sizeof buf, "%.6f", region.scale_y);
  cfg.set("scale_y", buf);
  return cfg;
}

}  // namespace trajfm::data
