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

#include <benchmark/benchmark.h>

#include <random>

#include "trajfm/pretrain.hpp"
#include "trajfm/tasks.hpp"

namespace {

using namespace trajfm;

struct Scene {
  data::Dataset ds;
  geo::Region region;
  data::PoiIndex index;
  embedding::SyntheticPoiProvider provider{0, 64};
  std::vector<pretrain::AnnotatedPoint> points;

  // Longest raw trajectory of a small region, cut to n points.
  explicit Scene(std::size_t n)
      : ds(make(n)), region(ds.region), index(ds.pois) {
    data::Trajectory t = ds.trajectories.front();
    for (const auto& c : ds.trajectories) {
      if (c.points.size() > t.points.size()) t = c;
    }
    t.points.resize(std::min(n, t.points.size()));
    points = pretrain::annotate(t, region, index);
  }

  static data::Dataset make(std::size_t n) {
    data::SynthConfig sc;
    sc.trajectory_count = 50;
    sc.min_hops = static_cast<int>(n);
    sc.max_hops = static_cast<int>(n) + 10;
    sc.grid_size = static_cast<int>(n) + 20;
    return data::generate_synthetic(sc, 1);
  }
};

pretrain::TrainingSequence sequence(const Scene& s) {
  std::mt19937_64 rng(4);
  return pretrain::build_training_sequence(s.points,
                                           pretrain::sample_mask_plan(s.points.size(), rng));
}

void BM_Forward(benchmark::State& state) {
  const Scene s(static_cast<std::size_t>(state.range(0)));
  model::ModelConfig cfg;
  cfg.d = static_cast<int>(state.range(1));
  const model::Model<float> m(cfg, s.provider);
  const auto params = m.init_params(0);
  const auto seq = sequence(s);
  for (auto _ : state) benchmark::DoNotOptimize(m.predict(params, seq.input));
  state.SetLabel("n=" + std::to_string(seq.input.cells.size()));
}
BENCHMARK(BM_Forward)->Args({20, 32})->Args({20, 128})->Args({60, 128})->Unit(benchmark::kMicrosecond);

void BM_TrainingStep(benchmark::State& state) {
  const Scene s(static_cast<std::size_t>(state.range(0)));
  model::ModelConfig cfg;
  cfg.d = static_cast<int>(state.range(1));
  const model::Model<float> m(cfg, s.provider);
  auto params = m.init_params(0);
  nn::Adam<float> adam(params, nn::AdamHyper{});
  nn::GradStore<float> grads(params);
  const auto seq = sequence(s);
  for (auto _ : state) {
    grads.zero();
    benchmark::DoNotOptimize(pretrain::accumulate_gradients(m, params, seq, grads));
    adam.step(params, grads);
  }
}
BENCHMARK(BM_TrainingStep)->Args({20, 32})->Args({20, 128})->Args({60, 128})->Unit(benchmark::kMicrosecond);

void BM_Rotary(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  std::mt19937_64 rng(0);
  std::normal_distribution<double> n;
  std::vector<double> v(static_cast<std::size_t>(d)), phi(static_cast<std::size_t>(d / 2));
  for (auto& x : v) x = n(rng);
  for (auto& x : phi) x = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(model::rotary_apply(v, phi));
}
BENCHMARK(BM_Rotary)->Arg(16)->Arg(128);

void BM_UtmRoundTrip(benchmark::State& state) {
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> lng(-180, 180), lat(-60, 60);
  std::vector<geo::LngLat> pts(1024);
  for (auto& p : pts) p = {lng(rng), lat(rng)};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(geo::utm_invert(geo::utm_project(pts[i++ & 1023])));
  }
}
BENCHMARK(BM_UtmRoundTrip);

void BM_PoiNearest(benchmark::State& state) {
  data::SynthConfig sc;
  sc.trajectory_count = 1;
  sc.poi_count = static_cast<int>(state.range(0));
  sc.grid_size = 80;
  const auto ds = data::generate_synthetic(sc, 2);
  const data::PoiIndex index(ds.pois);
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> dx(-0.04, 0.04);
  std::vector<geo::LngLat> q(1024);
  for (auto& p : q) p = {sc.center.lng + dx(rng), sc.center.lat + dx(rng)};
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(&index.nearest(q[i++ & 1023]));
}
BENCHMARK(BM_PoiNearest)->Arg(400)->Arg(4000);

void BM_Decode(benchmark::State& state) {
  const Scene s(30);
  model::ModelConfig cfg;
  cfg.max_gen_len = static_cast<int>(state.range(0));
  const model::Model<float> m(cfg, s.provider);
  auto params = m.init_params(0);
  params.at("head.end_spatial.weight").setZero();
  params.at("head.end_spatial.bias").setConstant(-5.0f);  // never stop early
  const tasks::TaskContext<float> ctx{m, params, s.region, s.index};
  std::vector<embedding::PointCells> context;
  for (std::size_t i = 0; i < 20; ++i) context.push_back(pretrain::full_cells(s.points[i]));
  context.push_back(embedding::PointCells::all(embedding::SpecialToken::kMask));
  for (auto _ : state) benchmark::DoNotOptimize(tasks::autoregressive_recover(context, ctx));
}
BENCHMARK(BM_Decode)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
