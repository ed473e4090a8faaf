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

#include "trajfm/tasks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>

#include "trajfm/error.hpp"

namespace trajfm::tasks {

using embedding::PointCells;
using embedding::PoiRef;
using embedding::SpecialToken;
using pretrain::AnnotatedPoint;

const char* stop_reason_name(StopReason r) {
  return r == StopReason::kEndFlag ? "END_FLAG" : "MAX_LEN";
}

template <typename T>
GeneratedPoint materialize(const model::PointPrediction& p, const TaskContext<T>& ctx) {
  GeneratedPoint g;
  g.prediction = p;
  auto clamp = [](double v) {
    return std::isfinite(v) ? std::clamp(v, -kMaxNormCoord, kMaxNormCoord) : 0.0;
  };
  g.xy = {clamp(p.xy.x), clamp(p.xy.y)};
  g.loc = ctx.region.to_lnglat(g.xy);
  g.poi = &model::recover_poi(g.xy, ctx.region, ctx.index);
  g.tf = {p.t[0], p.t[1], p.t[2], p.t[3]};
  return g;
}

template <typename T>
GenerationTrace autoregressive_recover(const std::vector<PointCells>& context,
                                       const TaskContext<T>& ctx) {
  if (context.empty()) throw DataError("autoregressive_recover: empty context");
  model::InputSequence in;
  in.cells = context;
  in.cells.push_back(PointCells::all(SpecialToken::kStart));
  in.mask.context = context.size();
  in.mask.generation = 1;
  GenerationTrace trace;
  const auto cap = static_cast<std::size_t>(ctx.model.config().max_gen_len);
  for (;;) {
    const auto preds = ctx.model.predict(ctx.params, in);
    const model::PointPrediction& last = preds.back();
    if (last.end_spatial >= 0.5 && last.end_temporal >= 0.5) {
      trace.stop = StopReason::kEndFlag;
      trace.terminal = last;
      break;
    }
    GeneratedPoint g = materialize(last, ctx);
    in.cells.push_back(PointCells{g.xy, g.tf, PoiRef{g.poi}});
    ++in.mask.generation;
    trace.points.push_back(std::move(g));
    if (trace.points.size() >= cap) {
      trace.stop = StopReason::kMaxLen;
      break;
    }
  }
  return trace;
}

template <typename T>
double estimate_trajectory_eta(const data::Trajectory& t, const TaskContext<T>& ctx) {
  if (t.size() < 2) throw DataError("trajectory ETA needs at least 2 points ('" + t.id + "')");
  const auto pts = pretrain::annotate(t, ctx.region, ctx.index);
  model::InputSequence in;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    PointCells c = pretrain::full_cells(pts[i]);
    if (i > 0) c.temporal = SpecialToken::kMask;
    in.cells.push_back(c);
  }
  in.mask.context = in.cells.size();
  const auto preds = ctx.model.predict(ctx.params, in);
  return preds.back().t[3] * 60.0;
}

template <typename T>
model::InputSequence od_eta_input(const data::TrajPoint& origin, const geo::LngLat& dest,
                                  const TaskContext<T>& ctx) {
  data::Trajectory one;
  one.points.push_back(origin);
  const auto o = pretrain::annotate(one, ctx.region, ctx.index).front();
  model::InputSequence in;
  in.cells.push_back(pretrain::full_cells(o));
  in.cells.push_back(PointCells::all(SpecialToken::kMask));
  in.cells.push_back(PointCells{ctx.region.to_norm(dest), SpecialToken::kMask,
                                PoiRef{&ctx.index.nearest(dest)}});
  in.mask.context = 3;
  return in;
}

template <typename T>
double estimate_od_eta(const data::TrajPoint& origin, const geo::LngLat& dest,
                       const TaskContext<T>& ctx) {
  const auto preds = ctx.model.predict(ctx.params, od_eta_input(origin, dest, ctx));
  return preds[2].t[3] * 60.0;
}

template <typename T>
FuturePrediction predict_future(const data::Trajectory& t, const TaskContext<T>& ctx) {
  if (t.size() < kMinFutureLength) {
    throw DataError("trajectory prediction needs at least 6 points ('" + t.id + "')");
  }
  const std::size_t keep = t.size() - kFutureHorizon;
  const auto pts = pretrain::annotate(t, ctx.region, ctx.index);
  std::vector<PointCells> context;
  for (std::size_t i = 0; i < keep; ++i) context.push_back(pretrain::full_cells(pts[i]));
  context.push_back(PointCells::all(SpecialToken::kMask));
  FuturePrediction fp;
  fp.context_positions = context.size();
  fp.trace = autoregressive_recover(context, ctx);
  if (fp.trace.stop == StopReason::kEndFlag) {
    fp.destination = materialize(*fp.trace.terminal, ctx).loc;
  } else if (!fp.trace.points.empty()) {
    fp.destination = fp.trace.points.back().loc;
  } else {
    fp.destination = t.points[keep - 1].loc;
  }
  return fp;
}

const char* task_name(Task t) {
  switch (t) {
    case Task::kTrajEta: return "traj-eta";
    case Task::kOdEta: return "od-eta";
    case Task::kTrajPred: return "traj-pred";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  for (Task t : {Task::kTrajEta, Task::kOdEta, Task::kTrajPred}) {
    if (s == task_name(t)) return t;
  }
  throw UsageError("unknown task '" + s + "' (expected traj-eta, od-eta or traj-pred)");
}

Metrics eta_metrics(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("eta_metrics: size mismatch");
  Metrics m;
  m.n = predicted.size();
  if (m.n == 0) return m;
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  std::size_t pct_n = 0;
  for (std::size_t i = 0; i < m.n; ++i) {
    const double err = predicted[i] - truth[i];
    abs_sum += std::abs(err);
    sq_sum += err * err;
    if (truth[i] >= 1.0) {
      pct_sum += std::abs(err) / truth[i];
      ++pct_n;
    }
  }
  m.mae = abs_sum / static_cast<double>(m.n);
  m.rmse = std::sqrt(sq_sum / static_cast<double>(m.n));
  m.mape = pct_n > 0 ? pct_sum / static_cast<double>(pct_n) * 100.0 : 0.0;
  return m;
}

Metrics distance_metrics(std::span<const double> errors) {
  Metrics m;
  m.n = errors.size();
  if (m.n == 0) return m;
  double abs_sum = 0.0, sq_sum = 0.0;
  for (double e : errors) {
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  m.mae = abs_sum / static_cast<double>(m.n);
  m.rmse = std::sqrt(sq_sum / static_cast<double>(m.n));
  return m;
}

template <typename T>
TaskResult evaluate(Task task, std::span<const data::Trajectory> trajectories,
                    const TaskContext<T>& ctx) {
  if (trajectories.empty()) throw DataError("evaluate: no trajectories");
  const auto t0 = std::chrono::steady_clock::now();
  TaskResult res;
  res.task = task;
  std::vector<double> pred, truth, dist;
  for (const auto& t : trajectories) {
    Record r;
    r.id = t.id;
    switch (task) {
      case Task::kTrajEta:
      case Task::kOdEta: {
        if (t.size() < 2) {
          ++res.skipped;
          continue;
        }
        r.predicted = task == Task::kTrajEta
                          ? estimate_trajectory_eta(t, ctx)
                          : estimate_od_eta(t.points.front(), t.points.back().loc, ctx);
        r.truth = t.duration();
        r.error = r.predicted - r.truth;
        pred.push_back(r.predicted);
        truth.push_back(r.truth);
        break;
      }
      case Task::kTrajPred: {
        if (t.size() < kMinFutureLength) {
          ++res.skipped;
          continue;
        }
        const FuturePrediction fp = predict_future(t, ctx);
        r.error = geo::haversine_m(fp.destination, t.points.back().loc);
        r.predicted = r.error;
        dist.push_back(r.error);
        break;
      }
    }
    if (!std::isfinite(r.error)) {
      throw NumericalError("evaluate: non-finite prediction for trajectory '" + t.id + "'");
    }
    res.records.push_back(std::move(r));
  }
  if (res.records.empty()) throw DataError("evaluate: no trajectory is long enough for the task");
  res.metrics = task == Task::kTrajPred ? distance_metrics(dist) : eta_metrics(pred, truth);
  res.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

Metrics last_observed_baseline(std::span<const data::Trajectory> trajectories) {
  std::vector<double> errors;
  for (const auto& t : trajectories) {
    if (t.size() < kMinFutureLength) continue;
    errors.push_back(geo::haversine_m(t.points[t.size() - 1 - kFutureHorizon].loc,
                                      t.points.back().loc));
  }
  return distance_metrics(errors);
}

std::string report_json(const TaskResult& r, const std::string& checkpoint_path) {
  nlohmann::ordered_json j;
  j["task"] = task_name(r.task);
  j["n_samples"] = r.metrics.n;
  j["mae"] = r.metrics.mae;
  j["rmse"] = r.metrics.rmse;
  if (r.metrics.mape) j["mape"] = *r.metrics.mape;
  j["runtime_seconds"] = r.runtime_seconds;
  j["checkpoint_path"] = checkpoint_path;
  return j.dump(2);
}

#define TRAJFM_TASKS_INSTANTIATE(T)                                                        \
  template GeneratedPoint materialize<T>(const model::PointPrediction&,                    \
                                         const TaskContext<T>&);                           \
  template GenerationTrace autoregressive_recover<T>(const std::vector<PointCells>&,       \
                                                     const TaskContext<T>&);               \
  template double estimate_trajectory_eta<T>(const data::Trajectory&, const TaskContext<T>&); \
  template model::InputSequence od_eta_input<T>(const data::TrajPoint&, const geo::LngLat&, \
                                                const TaskContext<T>&);                    \
  template double estimate_od_eta<T>(const data::TrajPoint&, const geo::LngLat&,           \
                                     const TaskContext<T>&);                               \
  template FuturePrediction predict_future<T>(const data::Trajectory&, const TaskContext<T>&); \
  template TaskResult evaluate<T>(Task, std::span<const data::Trajectory>,                 \
                                  const TaskContext<T>&);

TRAJFM_TASKS_INSTANTIATE(float)
TRAJFM_TASKS_INSTANTIATE(double)

#undef TRAJFM_TASKS_INSTANTIATE

}  // namespace trajfm::tasks
