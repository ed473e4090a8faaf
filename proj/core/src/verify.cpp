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

#include "trajfm/verify.hpp"

#include <random>

#include "trajfm/error.hpp"

namespace trajfm::pretrain {

GradCheckFixture gradcheck_fixture(std::uint64_t seed) {
  data::SynthConfig sc;
  sc.trajectory_count = 1;
  sc.poi_count = 40;
  GradCheckFixture fx;
  fx.dataset = data::generate_synthetic(sc, seed);
  data::Trajectory t = data::three_hop_resample(fx.dataset.trajectories.front());
  if (t.size() < 5) throw DataError("gradcheck fixture: trajectory shorter than 5 points");
  t.points.resize(5);
  const geo::Region region(fx.dataset.region);
  fx.index = std::make_unique<const data::PoiIndex>(fx.dataset.pois);
  fx.points = annotate(t, region, *fx.index);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  MaskPlan plan;
  plan.s = 2;
  plan.e = 4;
  for (int i = 0; i < 2; ++i) plan.choice.push_back(coin(rng) ? Modality::kSpatial : Modality::kTemporal);
  fx.sequence = build_training_sequence(fx.points, plan);
  return fx;
}

nn::GradCheckReport full_loss_gradcheck(const model::ModelConfig& cfg,
                                        const embedding::PoiVectorProvider& provider,
                                        std::uint64_t seed,
                                        const nn::GradCheckOptions& options) {
  const GradCheckFixture fx = gradcheck_fixture(seed);
  const model::Model<double> m(cfg, provider);
  nn::ParamStore<double> params = m.init_params(seed);
  const TrainingSequence& seq = fx.sequence;
  auto loss = [&](const nn::ParamStore<double>& p) {
    nn::Graph<double> g(&p, false);
    const auto f = m.forward(g, seq.input);
    return g.value(sequence_loss(g, f, std::span<const Target>(seq.targets)))(0, 0);
  };
  auto grad = [&](const nn::ParamStore<double>& p, nn::GradStore<double>& gs) {
    return accumulate_gradients(m, p, seq, gs);
  };
  return nn::finite_difference_check(loss, grad, params, options);
}

}  // namespace trajfm::pretrain
