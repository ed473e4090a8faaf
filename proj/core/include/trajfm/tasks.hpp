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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajfm/data.hpp"
#include "trajfm/pretrain.hpp"
#include "trajfm/strformer.hpp"

namespace trajfm::tasks {

// Generated normalized coordinates are clamped to this box before inversion
// so a diverging model cannot leave the projection's domain.
inline constexpr double kMaxNormCoord = 50.0;

// Everything a task needs to run a frozen model in one region.
template <typename T>
struct TaskContext {
  const model::Model<T>& model;
  const nn::ParamStore<T>& params;
  const geo::Region& region;
  const data::PoiIndex& index;
};

enum class StopReason : std::uint8_t { kEndFlag, kMaxLen };
const char* stop_reason_name(StopReason r);

struct GeneratedPoint {
  model::PointPrediction prediction;
  geo::NormXY xy;  // clamped coordinates fed back as input
  geo::LngLat loc;
  const data::Poi* poi = nullptr;
  data::TemporalFeatures tf;
};

struct GenerationTrace {
  std::vector<GeneratedPoint> points;
  StopReason stop = StopReason::kMaxLen;
  // The prediction whose end flags fired (never emitted as a point).
  std::optional<model::PointPrediction> terminal;
};

// Turns a prediction into model-ready values (clamped xy, location, nearest
// POI, temporal features from the temporal head).
template <typename T>
GeneratedPoint materialize(const model::PointPrediction& p, const TaskContext<T>& ctx);

// Appends p_[s] to the context and decodes until both end heads reach 0.5 or
// max_gen_len points have been generated.
template <typename T>
GenerationTrace autoregressive_recover(const std::vector<embedding::PointCells>& context,
                                       const TaskContext<T>& ctx);

// Travel time in seconds from the dt_min head at the last position, with
// temporal cells masked at points 2..n. Throws DataError if n < 2.
template <typename T>
double estimate_trajectory_eta(const data::Trajectory& t, const TaskContext<T>& ctx);

// Input sequence used by estimate_od_eta: <p_1, p_[m], p'_n>.
template <typename T>
model::InputSequence od_eta_input(const data::TrajPoint& origin, const geo::LngLat& dest,
                                  const TaskContext<T>& ctx);
template <typename T>
double estimate_od_eta(const data::TrajPoint& origin, const geo::LngLat& dest,
                       const TaskContext<T>& ctx);

inline constexpr std::size_t kFutureHorizon = 5;
inline constexpr std::size_t kMinFutureLength = kFutureHorizon + 1;

struct FuturePrediction {
  GenerationTrace trace;
  std::size_t context_positions = 0;  // n' + 1
  geo::LngLat destination;
};

// Context <p_1..p_{n-5}, p_[m]>. The destination is the terminal prediction's
// coordinates when decoding stopped on the end flag, otherwise the last
// generated point, otherwise p_{n-5}. Throws DataError if n < 6.
template <typename T>
FuturePrediction predict_future(const data::Trajectory& t, const TaskContext<T>& ctx);

enum class Task : std::uint8_t { kTrajEta, kOdEta, kTrajPred };
const char* task_name(Task t);
Task parse_task(const std::string& s);  // throws UsageError

struct Metrics {
  std::size_t n = 0;
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape;  // percent; ETA tasks only
};

// MAE/RMSE of prediction - truth; MAPE over samples with truth >= 1.
Metrics eta_metrics(std::span<const double> predicted, std::span<const double> truth);
// MAE/RMSE of nonnegative distance errors.
Metrics distance_metrics(std::span<const double> errors);

struct Record {
  std::string id;
  double predicted = 0.0;  // seconds (ETA) or meters from the true destination
  double truth = 0.0;      // seconds (ETA) or 0
  double error = 0.0;
};

struct TaskResult {
  Task task = Task::kTrajEta;
  std::vector<Record> records;
  Metrics metrics;
  std::size_t skipped = 0;  // trajectories too short for the task
  double runtime_seconds = 0.0;
};

template <typename T>
TaskResult evaluate(Task task, std::span<const data::Trajectory> trajectories,
                    const TaskContext<T>& ctx);

// Destination error of predicting p_{n-5} for every trajectory with n >= 6.
Metrics last_observed_baseline(std::span<const data::Trajectory> trajectories);

// {task, n_samples, mae, rmse, mape?, runtime_seconds, checkpoint_path}.
std::string report_json(const TaskResult& r, const std::string& checkpoint_path);

}  // namespace trajfm::tasks
