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

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trajfm/adam.hpp"
#include "trajfm/data.hpp"
#include "trajfm/strformer.hpp"

namespace trajfm::pretrain {

// A trajectory point with every modality value resolved.
struct AnnotatedPoint {
  geo::NormXY xy;
  data::TemporalFeatures tf;
  const data::Poi* poi = nullptr;
};

// Points of `t` normalized in `region` with their nearest POI from `index`.
// The returned pointers refer into `index`.
std::vector<AnnotatedPoint> annotate(const data::Trajectory& t, const geo::Region& region,
                                     const data::PoiIndex& index);

// All three modality values of a point.
embedding::PointCells full_cells(const AnnotatedPoint& p);

enum class Modality : std::uint8_t { kSpatial, kTemporal };

// 1-based sub-trajectory [s, e] and the modality masked at each point outside
// it, in trajectory order (n - (e - s + 1) entries).
struct MaskPlan {
  std::size_t s = 1;
  std::size_t e = 2;
  std::vector<Modality> choice;
};

// s, e ~ U{1..n} by rejection until s < e; each remaining point masks its
// spatial or temporal modality with probability 1/2. Throws DataError if n < 2.
MaskPlan sample_mask_plan(std::size_t n, std::mt19937_64& rng);

struct Target {
  std::size_t position = 0;
  bool spatial = false;   // supervise xy
  bool temporal = false;  // supervise temporal features
  geo::NormXY xy;
  std::array<double, 4> t{};
  double r = 0.0;  // end flag for both end heads
};

struct TrainingSequence {
  model::InputSequence input;
  std::vector<Target> targets;
};

// Context <p_1*, .., p_{s-1}*, p_[m], p_{e+1}*, .., p_n*> (* = modality
// masked) followed by the teacher-forced generation block <p_[s], p_s, ..,
// p_{e-1}>, whose k-th position predicts p_{s+k}; the last one carries r = 1.
TrainingSequence build_training_sequence(std::span<const AnnotatedPoint> points,
                                         const MaskPlan& plan);

// Sum over targets of the squared spatial error, sqrt(sum temporal^2 + 1e-12)
// and the binary cross-entropy of both end heads (probabilities clamped to
// [1e-7, 1 - 1e-7]).
template <typename T>
nn::Var sequence_loss(nn::Graph<T>& g, const model::ForwardResult<T>& f,
                      std::span<const Target> targets);

// Same quantity from already computed predictions (indexed by position).
double compute_loss(std::span<const model::PointPrediction> predictions,
                    std::span<const Target> targets);

// Builds, runs and differentiates one sequence; returns the loss value.
template <typename T>
double accumulate_gradients(const model::Model<T>& m, const nn::ParamStore<T>& params,
                            const TrainingSequence& seq, nn::GradStore<T>& grads);

struct TrainConfig {
  int epochs = 30;
  int batch = 16;
  nn::AdamHyper adam{};
  std::uint64_t seed = 0;

  // Keys: epochs, batch, lr, seed.
  static TrainConfig from_config(const KvConfig& cfg);
  KvConfig to_config() const;
  void validate() const;  // throws UsageError
};

struct TrainResult {
  std::vector<double> loss_history;  // mean sequence loss per epoch
  std::uint64_t steps = 0;           // optimizer steps taken
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Trains params in place. Each epoch shuffles the trajectories (seeded),
// draws a MaskPlan per trajectory, sums losses over `batch` sequences and
// takes one Adam step. A non-finite loss throws NumericalError.
template <typename T>
TrainResult pretrain(const model::Model<T>& m, nn::ParamStore<T>& params,
                     const std::vector<data::Trajectory>& train, const geo::Region& region,
                     const data::PoiIndex& index, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {});

}  // namespace trajfm::pretrain
