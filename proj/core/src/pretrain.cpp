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

#include "trajfm/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "trajfm/error.hpp"

namespace trajfm::pretrain {

using embedding::PointCells;
using embedding::PoiRef;
using embedding::SpecialToken;
using nn::Graph;
using nn::Mat;
using nn::Var;

namespace {

constexpr double kTemporalEps = 1e-12;
constexpr double kProbLo = 1e-7;
constexpr double kProbHi = 1.0 - 1e-7;

}  // namespace

std::vector<AnnotatedPoint> annotate(const data::Trajectory& t, const geo::Region& region,
                                     const data::PoiIndex& index) {
  if (index.empty()) throw DataError("annotate: empty POI index");
  std::vector<AnnotatedPoint> out;
  out.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    AnnotatedPoint p;
    p.xy = region.to_norm(t.points[i].loc);
    p.tf = data::expand_temporal(t, i);
    p.poi = &index.nearest(t.points[i].loc);
    out.push_back(p);
  }
  return out;
}

PointCells full_cells(const AnnotatedPoint& p) { return {p.xy, p.tf, PoiRef{p.poi}}; }

MaskPlan sample_mask_plan(std::size_t n, std::mt19937_64& rng) {
  if (n < 2) throw DataError("sample_mask_plan: need at least 2 points");
  std::uniform_int_distribution<std::size_t> pick(1, n);
  MaskPlan plan;
  do {
    plan.s = pick(rng);
    plan.e = pick(rng);
  } while (plan.s >= plan.e);
  const std::size_t rest = n - (plan.e - plan.s + 1);
  std::bernoulli_distribution coin(0.5);
  plan.choice.reserve(rest);
  for (std::size_t i = 0; i < rest; ++i) {
    plan.choice.push_back(coin(rng) ? Modality::kSpatial : Modality::kTemporal);
  }
  return plan;
}

TrainingSequence build_training_sequence(std::span<const AnnotatedPoint> points,
                                         const MaskPlan& plan) {
  const std::size_t n = points.size();
  if (plan.s < 1 || plan.s >= plan.e || plan.e > n ||
      plan.choice.size() != n - (plan.e - plan.s + 1)) {
    throw std::invalid_argument("build_training_sequence: plan does not fit the trajectory");
  }
  TrainingSequence seq;
  auto& cells = seq.input.cells;
  std::size_t ci = 0;
  auto add_context_point = [&](std::size_t i) {
    const AnnotatedPoint& p = points[i];
    Target tg;
    tg.position = cells.size();
    PointCells c = full_cells(p);
    if (plan.choice[ci++] == Modality::kSpatial) {
      c.spatial = SpecialToken::kMask;
      c.poi = SpecialToken::kMask;
      tg.spatial = true;
      tg.xy = p.xy;
    } else {
      c.temporal = SpecialToken::kMask;
      tg.temporal = true;
      tg.t = p.tf.as_array();
    }
    cells.push_back(c);
    seq.targets.push_back(tg);
  };
  // 0-based: sub-trajectory occupies [s-1, e-1].
  for (std::size_t i = 0; i + 1 < plan.s; ++i) add_context_point(i);
  cells.push_back(PointCells::all(SpecialToken::kMask));
  for (std::size_t i = plan.e; i < n; ++i) add_context_point(i);
  seq.input.mask.context = cells.size();

  cells.push_back(PointCells::all(SpecialToken::kStart));
  for (std::size_t i = plan.s - 1; i + 1 < plan.e; ++i) cells.push_back(full_cells(points[i]));
  seq.input.mask.generation = cells.size() - seq.input.mask.context;
  for (std::size_t k = 0; k < seq.input.mask.generation; ++k) {
    const AnnotatedPoint& p = points[plan.s - 1 + k];
    Target tg;
    tg.position = seq.input.mask.context + k;
    tg.spatial = true;
    tg.temporal = true;
    tg.xy = p.xy;
    tg.t = p.tf.as_array();
    tg.r = (k + 1 == seq.input.mask.generation) ? 1.0 : 0.0;
    seq.targets.push_back(tg);
  }
  return seq;
}

template <typename T>
Var sequence_loss(Graph<T>& g, const model::ForwardResult<T>& f,
                  std::span<const Target> targets) {
  using Ref = typename Graph<T>::RowRef;
  if (targets.empty()) throw std::invalid_argument("sequence_loss: no targets");
  std::vector<Ref> xs, ts, es, et;
  std::vector<std::array<double, 2>> xy_t;
  std::vector<std::array<double, 4>> tf_t;
  Mat<T> r(static_cast<Eigen::Index>(targets.size()), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Target& tg = targets[i];
    const auto row = static_cast<Eigen::Index>(tg.position);
    if (tg.spatial) {
      xs.push_back({f.xy, row});
      xy_t.push_back({tg.xy.x, tg.xy.y});
    }
    if (tg.temporal) {
      ts.push_back({f.temporal, row});
      tf_t.push_back(tg.t);
    }
    es.push_back({f.end_spatial, row});
    et.push_back({f.end_temporal, row});
    r(static_cast<Eigen::Index>(i), 0) = static_cast<T>(tg.r);
  }
  std::vector<Var> terms;
  if (!xs.empty()) {
    Mat<T> tgt(static_cast<Eigen::Index>(xs.size()), 2);
    for (std::size_t i = 0; i < xy_t.size(); ++i) {
      tgt(static_cast<Eigen::Index>(i), 0) = static_cast<T>(xy_t[i][0]);
      tgt(static_cast<Eigen::Index>(i), 1) = static_cast<T>(xy_t[i][1]);
    }
    const Var d = g.sub(g.gather_rows(std::span<const Ref>(xs)), g.constant(std::move(tgt)));
    terms.push_back(g.sum_all(g.square(d)));
  }
  if (!ts.empty()) {
    Mat<T> tgt(static_cast<Eigen::Index>(ts.size()), 4);
    for (std::size_t i = 0; i < tf_t.size(); ++i) {
      for (int c = 0; c < 4; ++c) {
        tgt(static_cast<Eigen::Index>(i), c) = static_cast<T>(tf_t[i][static_cast<std::size_t>(c)]);
      }
    }
    const Var d = g.sub(g.gather_rows(std::span<const Ref>(ts)), g.constant(std::move(tgt)));
    terms.push_back(
        g.sum_all(g.sqrt_eps(g.row_sum(g.square(d)), static_cast<T>(kTemporalEps))));
  }
  const T lo = static_cast<T>(kProbLo), hi = static_cast<T>(kProbHi);
  terms.push_back(g.sum_all(g.bce(g.gather_rows(std::span<const Ref>(es)), r, lo, hi)));
  terms.push_back(g.sum_all(g.bce(g.gather_rows(std::span<const Ref>(et)), r, lo, hi)));
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = g.add(total, terms[i]);
  return total;
}

double compute_loss(std::span<const model::PointPrediction> predictions,
                    std::span<const Target> targets) {
  auto bce = [](double p, double r) {
    p = std::clamp(p, kProbLo, kProbHi);
    return -(r * std::log(p) + (1.0 - r) * std::log(1.0 - p));
  };
  double total = 0.0;
  for (const Target& tg : targets) {
    if (tg.position >= predictions.size()) {
      throw std::invalid_argument("compute_loss: target position out of range");
    }
    const model::PointPrediction& p = predictions[tg.position];
    if (tg.spatial) {
      const double dx = p.xy.x - tg.xy.x, dy = p.xy.y - tg.xy.y;
      total += dx * dx + dy * dy;
    }
    if (tg.temporal) {
      double s = 0.0;
      for (std::size_t c = 0; c < 4; ++c) s += (p.t[c] - tg.t[c]) * (p.t[c] - tg.t[c]);
      total += std::sqrt(s + kTemporalEps);
    }
    total += bce(p.end_spatial, tg.r) + bce(p.end_temporal, tg.r);
  }
  return total;
}

template <typename T>
double accumulate_gradients(const model::Model<T>& m, const nn::ParamStore<T>& params,
                            const TrainingSequence& seq, nn::GradStore<T>& grads) {
  Graph<T> g(&params, true);
  const auto f = m.forward(g, seq.input);
  const Var loss = sequence_loss(g, f, std::span<const Target>(seq.targets));
  const double value = static_cast<double>(g.value(loss)(0, 0));
  if (!std::isfinite(value)) return value;
  g.backward(loss, grads);
  return value;
}

TrainConfig TrainConfig::from_config(const KvConfig& cfg) {
  TrainConfig t;
  t.epochs = static_cast<int>(cfg.get_int("epochs", t.epochs));
  t.batch = static_cast<int>(cfg.get_int("batch", t.batch));
  t.adam.lr = cfg.get_double("lr", t.adam.lr);
  t.seed = cfg.get_uint("seed", t.seed);
  return t;
}

KvConfig TrainConfig::to_config() const {
  KvConfig c;
  c.set("epochs", std::to_string(epochs));
  c.set("batch", std::to_string(batch));
  c.set_double("lr", adam.lr);
  c.set("seed", std::to_string(seed));
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw UsageError("train: epochs must be >= 0");
  if (batch < 1) throw UsageError("train: batch must be >= 1");
  if (!(adam.lr > 0.0) || !std::isfinite(adam.lr)) throw UsageError("train: lr must be > 0");
}

template <typename T>
TrainResult pretrain(const model::Model<T>& m, nn::ParamStore<T>& params,
                     const std::vector<data::Trajectory>& train, const geo::Region& region,
                     const data::PoiIndex& index, const TrainConfig& cfg,
                     const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw DataError("pretrain: empty training split");
  std::vector<std::vector<AnnotatedPoint>> annotated;
  annotated.reserve(train.size());
  for (const auto& t : train) {
    if (t.size() < 2) throw DataError("pretrain: trajectory '" + t.id + "' has fewer than 2 points");
    annotated.push_back(annotate(t, region, index));
  }
  std::mt19937_64 rng(cfg.seed ^ 0x5eed7a11f00dULL);
  nn::Adam<T> adam(params, cfg.adam);
  nn::GradStore<T> grads(params);
  std::vector<std::size_t> order(train.size());
  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch));
      grads.zero();
      for (std::size_t i = b; i < end; ++i) {
        const auto& pts = annotated[order[i]];
        const MaskPlan plan = sample_mask_plan(pts.size(), rng);
        const TrainingSequence seq =
            build_training_sequence(std::span<const AnnotatedPoint>(pts), plan);
        const double loss = accumulate_gradients(m, params, seq, grads);
        if (!std::isfinite(loss)) {
          throw NumericalError("pretrain: non-finite loss on trajectory '" +
                               train[order[i]].id + "' in epoch " + std::to_string(epoch) +
                               " (s=" + std::to_string(plan.s) +
                               ", e=" + std::to_string(plan.e) + ")");
        }
        sum += loss;
      }
      adam.step(params, grads);
      ++result.steps;
    }
    const double mean = sum / static_cast<double>(order.size());
    result.loss_history.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

#define TRAJFM_PRETRAIN_INSTANTIATE(T)                                                     \
  template Var sequence_loss<T>(Graph<T>&, const model::ForwardResult<T>&,                 \
                                std::span<const Target>);                                  \
  template double accumulate_gradients<T>(const model::Model<T>&, const nn::ParamStore<T>&, \
                                          const TrainingSequence&, nn::GradStore<T>&);     \
  template TrainResult pretrain<T>(const model::Model<T>&, nn::ParamStore<T>&,             \
                                   const std::vector<data::Trajectory>&, const geo::Region&, \
                                   const data::PoiIndex&, const TrainConfig&,              \
                                   const EpochCallback&);

TRAJFM_PRETRAIN_INSTANTIATE(float)
TRAJFM_PRETRAIN_INSTANTIATE(double)

#undef TRAJFM_PRETRAIN_INSTANTIATE

}  // namespace trajfm::pretrain
