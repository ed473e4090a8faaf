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
#include <span>
#include <vector>

#include "trajfm/autodiff.hpp"
#include "trajfm/data.hpp"
#include "trajfm/embedding.hpp"
#include "trajfm/geo.hpp"
#include "trajfm/kv_config.hpp"

namespace trajfm::model {

struct ModelConfig {
  int d = 128;
  int layers = 2;
  int ffn_hidden = 0;  // 0 selects 4d
  int mix_heads = 4;
  bool use_strpe = true;
  bool use_poi = true;
  int max_gen_len = 128;
  int poi_dim = 64;

  int ffn() const noexcept { return ffn_hidden > 0 ? ffn_hidden : 4 * d; }
  void validate() const;  // throws UsageError

  // Keys: d, layers, ffn_hidden, mix_heads, use_strpe, use_poi, max_gen_len,
  // poi_dim. Missing keys keep their defaults.
  static ModelConfig from_config(const KvConfig& cfg);
  KvConfig to_config() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Context block (positions [0, context)) is bidirectional; the generation
// block that follows is causal and may read the whole context; context
// positions never read generation positions.
struct AttentionMask {
  std::size_t context = 0;
  std::size_t generation = 0;

  std::size_t size() const noexcept { return context + generation; }
  bool allows(std::size_t i, std::size_t j) const noexcept;
  nn::BoolMat matrix() const;
};

// A model input: per-position modality cells plus the mask layout.
struct InputSequence {
  std::vector<embedding::PointCells> cells;
  AttentionMask mask;
};

struct PointPrediction {
  geo::NormXY xy;
  std::array<double, 4> t{};  // dow, hod, moh, dt_min (all >= 0)
  double end_spatial = 0.0;
  double end_temporal = 0.0;
};

// theta_k = 10000^(-2k/d), k = 1..d/2.
std::vector<double> rotary_theta(int d);
// Rotates pairs (2k, 2k+1) of v by phi[k] * theta[k].
std::vector<double> rotary_apply(std::span<const double> v, std::span<const double> phi);
// Phi = W_phi (x, y); ABSENT (nullptr) yields zeros. w_phi is (d/2) x 2.
template <typename T>
nn::Mat<T> compute_phi(const geo::NormXY* xy, const nn::Mat<T>& w_phi);
// Standard sinusoidal index encoding, n x d.
template <typename T>
nn::Mat<T> sinusoidal_encoding(std::size_t n, int d);

template <typename T>
struct LayerTrace {
  nn::Var out;     // n x d
  nn::Var logits;  // n x n, q k^T / sqrt(d) before masking
  nn::Var probs;   // n x n, masked softmax
};

template <typename T>
struct ForwardResult {
  nn::Var e;  // n x d mixed point embeddings
  nn::Var z;  // n x d encoder output
  nn::Var xy;            // n x 2
  nn::Var temporal;      // n x 4, softplus
  nn::Var end_spatial;   // n x 1, sigmoid
  nn::Var end_temporal;  // n x 1, sigmoid
  std::vector<LayerTrace<T>> layers;
};

// STRFormer: modality mixing, STRPE attention stack, and prediction heads.
// The model holds no parameters; every call reads them through the Graph's
// ParamStore, so frozen parameters may be shared across threads.
template <typename T>
class Model {
 public:
  Model(ModelConfig cfg, const embedding::PoiVectorProvider& provider);

  const ModelConfig& config() const noexcept { return cfg_; }
  const embedding::PoiVectorProvider& provider() const noexcept { return *provider_; }

  nn::ParamStore<T> init_params(std::uint64_t seed) const;

  // n x d point embeddings (1-layer transformer over the 3 slots + mean pool).
  nn::Var mix_modalities(nn::Graph<T>& g, std::span<const embedding::PointCells> cells) const;
  // n x 2 constant with (x, y) for spatial values and zeros for tokens.
  static nn::Mat<T> phi_inputs(std::span<const embedding::PointCells> cells);
  // One STRPE layer over inputs `e`; xy is the phi_inputs constant (ignored
  // without STRPE).
  LayerTrace<T> strpe_layer(nn::Graph<T>& g, nn::Var e, nn::Var xy, const nn::BoolMat& allow,
                            int layer) const;
  ForwardResult<T> forward(nn::Graph<T>& g, const InputSequence& in) const;

  // Forward-only evaluation returning every position's prediction.
  std::vector<PointPrediction> predict(const nn::ParamStore<T>& params,
                                       const InputSequence& in) const;
  // Encoder output z (n x d) without heads.
  nn::Mat<T> encode(const nn::ParamStore<T>& params, const InputSequence& in) const;

 private:
  embedding::PointCells effective(const embedding::PointCells& c) const;

  ModelConfig cfg_;
  const embedding::PoiVectorProvider* provider_;
  std::vector<T> theta_;
};

// Reads one row of forward heads into a PointPrediction.
template <typename T>
PointPrediction read_prediction(const nn::Graph<T>& g, const ForwardResult<T>& f,
                                Eigen::Index row);

// Nearest POI to a normalized prediction (denormalize, invert UTM, search).
const data::Poi& recover_poi(const geo::NormXY& xy, const geo::Region& region,
                             const data::PoiIndex& index);

}  // namespace trajfm::model
