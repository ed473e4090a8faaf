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

#include <fstream>

#include "trajfm/data.hpp"
#include "trajfm/error.hpp"

namespace trajfm::data {
namespace {

constexpr Split kSplits[] = {Split::kTrain, Split::kValidation, Split::kTest};

std::filesystem::path split_file(const std::filesystem::path& dir, Split s) {
  return dir / (std::string(split_name(s)) + ".csv");
}

void write_annotations(const std::filesystem::path& path, const Dataset& ds) {
  const PoiIndex index(ds.pois);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "traj_id,seq,poi_id\n";
  for (const auto& t : ds.trajectories) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      out << t.id << ',' << i << ',' << index.nearest(t.points[i].loc).id << '\n';
    }
  }
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

bool is_preprocessed_dir(const std::filesystem::path& dir) {
  const auto meta = dir / files::kMeta;
  return std::filesystem::exists(meta) && KvConfig::load(meta).get_bool("preprocessed", false);
}

void save_dataset_dir(const std::filesystem::path& dir, const Dataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  region_to_config(ds.region).save(dir / files::kRegion);
  write_pois_csv(dir / files::kPois, ds.pois);
  KvConfig meta;
  const bool split = !ds.split.empty();
  if (split && ds.split.size() != ds.trajectories.size()) {
    throw DataError("save_dataset_dir: split size does not match trajectory count");
  }
  meta.set("preprocessed", split ? "true" : "false");
  meta.set("trajectories", std::to_string(ds.trajectories.size()));
  meta.set("pois", std::to_string(ds.pois.size()));
  if (split) {
    for (Split s : kSplits) {
      const auto subset = ds.subset(s);
      write_trajectories_csv(split_file(dir, s), subset);
      meta.set(std::string(split_name(s)), std::to_string(subset.size()));
    }
    if (!ds.pois.empty()) write_annotations(dir / files::kPoiAnnotations, ds);
  } else {
    write_trajectories_csv(dir / files::kTrajectories, ds.trajectories);
  }
  meta.save(dir / files::kMeta);
}

Dataset load_dataset_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("dataset directory not found: " + dir.string());
  }
  Dataset ds;
  ds.region = region_from_config(KvConfig::load(dir / files::kRegion));
  ds.pois = load_pois_csv(dir / files::kPois);
  if (is_preprocessed_dir(dir)) {
    for (Split s : kSplits) {
      for (auto& t : load_trajectories_csv(split_file(dir, s))) {
        ds.trajectories.push_back(std::move(t));
        ds.split.push_back(s);
      }
    }
  } else {
    ds.trajectories = load_trajectories_csv(dir / files::kTrajectories);
  }
  return ds;
}

Dataset preprocess(Dataset raw) {
  if (!raw.split.empty()) return raw;
  std::vector<Trajectory> resampled;
  resampled.reserve(raw.trajectories.size());
  for (const auto& t : raw.trajectories) resampled.push_back(three_hop_resample(t));
  raw.trajectories = filter_length(resampled);
  return split_chronological(std::move(raw));
}

}  // namespace trajfm::data
