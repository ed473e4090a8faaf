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

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <random>

#include "trajfm/error.hpp"
#include "trajfm/tasks.hpp"

namespace trajfm::tasks {
namespace {

using embedding::PointCells;
using embedding::SpecialToken;

TEST(Metrics, Definitions) {
  const std::vector<double> p{110.0}, t{100.0};
  const Metrics m = eta_metrics(p, t);
  EXPECT_EQ(m.n, 1u);
  EXPECT_DOUBLE_EQ(m.mae, 10.0);
  EXPECT_DOUBLE_EQ(m.rmse, 10.0);
  ASSERT_TRUE(m.mape.has_value());
  EXPECT_DOUBLE_EQ(*m.mape, 10.0);

  const Metrics perfect = eta_metrics(t, t);
  EXPECT_EQ(perfect.mae, 0.0);
  EXPECT_EQ(perfect.rmse, 0.0);
  EXPECT_EQ(*perfect.mape, 0.0);

  // Sub-second truths are left out of MAPE only.
  const std::vector<double> p2{5.0, 60.0}, t2{0.5, 50.0};
  const Metrics m2 = eta_metrics(p2, t2);
  EXPECT_DOUBLE_EQ(m2.mae, (4.5 + 10.0) / 2);
  EXPECT_DOUBLE_EQ(*m2.mape, 20.0);
  EXPECT_THROW(eta_metrics(p, t2), std::invalid_argument);

  const std::vector<double> d{3.0, 4.0};
  const Metrics dm = distance_metrics(d);
  EXPECT_DOUBLE_EQ(dm.mae, 3.5);
  EXPECT_DOUBLE_EQ(dm.rmse, std::sqrt(12.5));
  EXPECT_FALSE(dm.mape.has_value());
}

TEST(Metrics, RmseNeverBelowMae) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> ex(0.01);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p, t;
    for (int i = 0; i < 1 + trial % 17; ++i) {
      p.push_back(ex(rng));
      t.push_back(ex(rng));
    }
    const Metrics m = eta_metrics(p, t);
    EXPECT_GE(m.rmse, m.mae * (1 - 1e-15));
    EXPECT_GE(m.mae, 0.0);
  }
}

TEST(Task, Names) {
  for (Task t : {Task::kTrajEta, Task::kOdEta, Task::kTrajPred}) {
    EXPECT_EQ(parse_task(task_name(t)), t);
  }
  EXPECT_THROW(parse_task("traj_eta"), UsageError);
  EXPECT_THROW(parse_task(""), UsageError);
}

struct Tasks : ::testing::Test {
  data::Dataset ds;
  std::unique_ptr<data::PoiIndex> index;
  std::unique_ptr<geo::Region> region;
  embedding::SyntheticPoiProvider prov{0, 64};
  model::ModelConfig cfg = [] {
    model::ModelConfig c;
    c.d = 16;
    c.max_gen_len = 6;
    return c;
  }();
  std::unique_ptr<model::Model<double>> m;
  nn::ParamStore<double> params;

  void SetUp() override {
    data::SynthConfig sc;
    sc.trajectory_count = 5;
    sc.poi_count = 60;
    ds = data::preprocess(data::generate_synthetic(sc, 4));
    index = std::make_unique<data::PoiIndex>(ds.pois);
    region = std::make_unique<geo::Region>(ds.region);
    m = std::make_unique<model::Model<double>>(cfg, prov);
    params = m->init_params(2);
  }

  TaskContext<double> ctx() const { return {*m, params, *region, *index}; }

  void force_end_heads(double prob) {
    const double logit = std::log(prob / (1 - prob));
    for (const char* h : {"head.end_spatial", "head.end_temporal"}) {
      params.at(std::string(h) + ".weight").setZero();
      params.at(std::string(h) + ".bias").setConstant(logit);
    }
  }

  std::vector<PointCells> context_of(const data::Trajectory& t, std::size_t keep) const {
    const auto pts = pretrain::annotate(t, *region, *index);
    std::vector<PointCells> c;
    for (std::size_t i = 0; i < keep; ++i) c.push_back(pretrain::full_cells(pts[i]));
    c.push_back(PointCells::all(SpecialToken::kMask));
    return c;
  }
};

TEST_F(Tasks, ConfidentEndHeadsStopImmediately) {
  force_end_heads(0.9);
  const auto trace = autoregressive_recover(context_of(ds.trajectories[0], 3), ctx());
  EXPECT_TRUE(trace.points.empty());
  EXPECT_EQ(trace.stop, StopReason::kEndFlag);
  ASSERT_TRUE(trace.terminal.has_value());
  EXPECT_NEAR(trace.terminal->end_spatial, 0.9, 1e-12);
}

TEST_F(Tasks, SilentEndHeadsRunToCap) {
  force_end_heads(0.1);
  const auto c = context_of(ds.trajectories[0], 3);
  const auto trace = autoregressive_recover(c, ctx());
  EXPECT_EQ(trace.points.size(), 6u);
  EXPECT_EQ(trace.stop, StopReason::kMaxLen);
  EXPECT_FALSE(trace.terminal.has_value());
  const auto again = autoregressive_recover(c, ctx());
  ASSERT_EQ(again.points.size(), trace.points.size());
  for (std::size_t i = 0; i < trace.points.size(); ++i) {
    EXPECT_EQ(again.points[i].xy.x, trace.points[i].xy.x);
    EXPECT_EQ(again.points[i].tf.dt_min, trace.points[i].tf.dt_min);
  }
}

TEST_F(Tasks, GeneratedPointsAreFedBack) {
  force_end_heads(0.1);
  const auto c = context_of(ds.trajectories[0], 3);
  const auto trace = autoregressive_recover(c, ctx());
  // Rebuild the final decoding step by hand and compare the last prediction.
  model::InputSequence in;
  in.cells = c;
  in.cells.push_back(PointCells::all(SpecialToken::kStart));
  for (std::size_t k = 0; k + 1 < trace.points.size(); ++k) {
    const auto& g = trace.points[k];
    in.cells.push_back(PointCells{g.xy, g.tf, embedding::PoiRef{g.poi}});
  }
  in.mask = {c.size(), in.cells.size() - c.size()};
  const auto preds = m->predict(params, in);
  EXPECT_EQ(preds.back().xy.x, trace.points.back().prediction.xy.x);
  EXPECT_EQ(preds.back().t, trace.points.back().prediction.t);
}

TEST_F(Tasks, MaterializeClampsAndResolvesPoi) {
  model::PointPrediction p;
  p.xy = {1e9, -std::numeric_limits<double>::infinity()};
  p.t = {1, 2, 3, 4};
  const GeneratedPoint g = materialize(p, ctx());
  EXPECT_EQ(g.xy.x, kMaxNormCoord);
  EXPECT_EQ(g.xy.y, 0.0);
  ASSERT_NE(g.poi, nullptr);
  EXPECT_EQ(g.poi->id, index->nearest(g.loc).id);
  EXPECT_EQ(g.tf.dt_min, 4.0);
  EXPECT_TRUE(std::isfinite(g.loc.lng) && std::isfinite(g.loc.lat));
}

TEST_F(Tasks, RecoverPoiAgreesWithLinearScan) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 200; ++i) {
    const geo::NormXY xy{u(rng), u(rng)};
    const auto loc = region->to_lnglat(xy);
    const data::Poi* best = nullptr;
    double best_d = 1e300;
    for (const auto& p : ds.pois) {
      const double d = geo::haversine_m(loc, p.loc);
      if (d < best_d || (d == best_d && p.id < best->id)) {
        best_d = d;
        best = &p;
      }
    }
    EXPECT_EQ(model::recover_poi(xy, *region, *index).id, best->id);
  }
  const auto at = region->to_norm(ds.pois[7].loc);
  EXPECT_EQ(model::recover_poi(at, *region, *index).id, ds.pois[7].id);
}

TEST_F(Tasks, TrajectoryEtaReadsLastDtWithTemporalMasked) {
  const auto& t = ds.trajectories[1];
  const double eta = estimate_trajectory_eta(t, ctx());
  const auto pts = pretrain::annotate(t, *region, *index);
  model::InputSequence in;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    PointCells c = pretrain::full_cells(pts[i]);
    if (i > 0) c.temporal = SpecialToken::kMask;
    in.cells.push_back(c);
  }
  in.mask = {pts.size(), 0};
  EXPECT_EQ(eta, m->predict(params, in).back().t[3] * 60.0);
  EXPECT_GT(eta, 0.0);
  data::Trajectory one = t;
  one.points.resize(1);
  EXPECT_THROW(estimate_trajectory_eta(one, ctx()), DataError);
}

TEST_F(Tasks, OdEtaInputLayout) {
  const auto& t = ds.trajectories[2];
  const auto in = od_eta_input(t.points.front(), t.points.back().loc, ctx());
  ASSERT_EQ(in.cells.size(), 3u);
  EXPECT_EQ(in.mask.context, 3u);
  EXPECT_EQ(in.mask.generation, 0u);
  EXPECT_FALSE(embedding::is_token(in.cells[0].spatial));
  EXPECT_FALSE(embedding::is_token(in.cells[0].temporal));
  EXPECT_FALSE(embedding::is_token(in.cells[0].poi));
  EXPECT_TRUE(embedding::is_token(in.cells[1].spatial, SpecialToken::kMask));
  EXPECT_TRUE(embedding::is_token(in.cells[1].temporal, SpecialToken::kMask));
  const auto dest = std::get<geo::NormXY>(in.cells[2].spatial);
  const auto want = region->to_norm(t.points.back().loc);
  EXPECT_DOUBLE_EQ(dest.x, want.x);
  EXPECT_TRUE(embedding::is_token(in.cells[2].temporal, SpecialToken::kMask));
  EXPECT_EQ(std::get<embedding::PoiRef>(in.cells[2].poi).poi->id,
            index->nearest(t.points.back().loc).id);
  const double eta = estimate_od_eta(t.points.front(), t.points.back().loc, ctx());
  EXPECT_EQ(eta, m->predict(params, in)[2].t[3] * 60.0);
  EXPECT_EQ(eta, estimate_od_eta(t.points.front(), t.points.back().loc, ctx()));
  EXPECT_GT(eta, 0.0);
}

TEST_F(Tasks, FutureContextAndDestination) {
  const auto& t = ds.trajectories[0];
  ASSERT_GE(t.size(), kMinFutureLength);
  const FuturePrediction fp = predict_future(t, ctx());
  EXPECT_EQ(fp.context_positions, t.size() - 5 + 1);
  EXPECT_LE(fp.trace.points.size(), 6u);
  for (const auto& g : fp.trace.points) {
    EXPECT_LE(std::abs(g.loc.lat), 90.0);
    EXPECT_LE(std::abs(g.loc.lng), 180.0);
  }
  data::Trajectory short_t = t;
  short_t.points.resize(5);
  EXPECT_THROW(predict_future(short_t, ctx()), DataError);

  force_end_heads(0.9);
  const FuturePrediction stop = predict_future(t, ctx());
  ASSERT_EQ(stop.trace.stop, StopReason::kEndFlag);
  EXPECT_EQ(stop.destination.lng, materialize(*stop.trace.terminal, ctx()).loc.lng);
}

TEST_F(Tasks, BaselineMatchesDirectComputation) {
  std::vector<data::Trajectory> ts(ds.trajectories.begin(), ds.trajectories.end());
  data::Trajectory tiny = ts[0];
  tiny.points.resize(5);
  ts.push_back(tiny);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : ts) {
    if (t.size() < 6) continue;
    sum += geo::haversine_m(t.points[t.size() - 6].loc, t.points.back().loc);
    ++n;
  }
  const Metrics b = last_observed_baseline(ts);
  EXPECT_EQ(b.n, n);
  EXPECT_NEAR(b.mae, sum / double(n), 1e-9);
  EXPECT_GE(b.rmse, b.mae);
}

TEST_F(Tasks, EvaluateAllTasksAndReport) {
  const std::span<const data::Trajectory> all(ds.trajectories);
  for (Task task : {Task::kTrajEta, Task::kOdEta, Task::kTrajPred}) {
    const TaskResult r = evaluate(task, all, ctx());
    EXPECT_EQ(r.records.size() + r.skipped, ds.trajectories.size());
    EXPECT_EQ(r.metrics.n, r.records.size());
    EXPECT_GE(r.metrics.rmse, r.metrics.mae);
    EXPECT_EQ(r.metrics.mape.has_value(), task != Task::kTrajPred);
    for (const auto& rec : r.records) {
      EXPECT_TRUE(std::isfinite(rec.error));
      if (task == Task::kTrajPred) {
        EXPECT_GE(rec.error, 0.0);
        continue;
      }
      const auto it = std::find_if(ds.trajectories.begin(), ds.trajectories.end(),
                                   [&](const data::Trajectory& t) { return t.id == rec.id; });
      ASSERT_NE(it, ds.trajectories.end());
      EXPECT_EQ(rec.truth, it->duration());
      EXPECT_EQ(rec.error, rec.predicted - rec.truth);
    }
    const auto j = nlohmann::json::parse(report_json(r, "model.tfm"));
    EXPECT_EQ(j.at("task"), task_name(task));
    EXPECT_EQ(j.at("n_samples"), r.metrics.n);
    EXPECT_EQ(j.at("mae").get<double>(), r.metrics.mae);
    EXPECT_EQ(j.at("rmse").get<double>(), r.metrics.rmse);
    EXPECT_EQ(j.contains("mape"), task != Task::kTrajPred);
    EXPECT_GE(j.at("runtime_seconds").get<double>(), 0.0);
    EXPECT_EQ(j.at("checkpoint_path"), "model.tfm");
    EXPECT_EQ(j.size(), task == Task::kTrajPred ? 6u : 7u);
  }
  EXPECT_THROW(evaluate(Task::kTrajEta, std::span<const data::Trajectory>{}, ctx()), DataError);
}

// One memorized trajectory per seed, trained once with a fixed budget and
// shared by the oracle checks below.
struct Memorized {
  data::Dataset ds;
  data::Trajectory t;
  std::unique_ptr<geo::Region> region;
  std::unique_ptr<data::PoiIndex> index;
  nn::ParamStore<float> params;
};

class OverfitOracle : public ::testing::Test {
 protected:
  static constexpr std::uint64_t kSeeds[] = {0, 1, 2};
  static inline const embedding::SyntheticPoiProvider prov{0, 64};
  static inline std::unique_ptr<model::Model<float>> model;
  static inline std::vector<Memorized> runs;

  static void SetUpTestSuite() {
    model = std::make_unique<model::Model<float>>(model::ModelConfig{}, prov);
    for (std::uint64_t seed : kSeeds) {
      Memorized r;
      data::SynthConfig sc;
      sc.trajectory_count = 1;
      sc.poi_count = 40;
      r.ds = data::generate_synthetic(sc, seed);
      r.t = data::three_hop_resample(r.ds.trajectories.front());
      r.region = std::make_unique<geo::Region>(r.ds.region);
      r.index = std::make_unique<data::PoiIndex>(r.ds.pois);
      r.params = model->init_params(seed);
      pretrain::TrainConfig tc;
      tc.epochs = 2000;
      tc.batch = 1;
      tc.seed = seed;
      pretrain::pretrain(*model, r.params, {r.t}, *r.region, *r.index, tc);
      runs.push_back(std::move(r));
    }
  }
  static void TearDownTestSuite() {
    runs.clear();
    model.reset();
  }
  static TaskContext<float> ctx(const Memorized& r) {
    return {*model, r.params, *r.region, *r.index};
  }
};

TEST_F(OverfitOracle, TrajectoryEtaWithinFivePercent) {
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const double truth = runs[i].t.duration();
    const double eta = estimate_trajectory_eta(runs[i].t, ctx(runs[i]));
    EXPECT_LT(std::abs(eta - truth), 0.05 * truth) << "seed " << kSeeds[i];
  }
}

TEST_F(OverfitOracle, DestinationWithinFiftyMeters) {
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto fp = predict_future(runs[i].t, ctx(runs[i]));
    EXPECT_LT(geo::haversine_m(fp.destination, runs[i].t.points.back().loc), 50.0)
        << "seed " << kSeeds[i] << ", " << fp.trace.points.size() << " points generated, stop "
        << stop_reason_name(fp.trace.stop);
  }
}

}  // namespace
}  // namespace trajfm::tasks
