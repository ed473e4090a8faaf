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

#include "trajfm/strformer.hpp"

#include <cmath>
#include <string>

#include "trajfm/error.hpp"

namespace trajfm::model {

using embedding::ModalityCell;
using embedding::PointCells;
using embedding::SpecialToken;
using nn::Graph;
using nn::Mat;
using nn::ParamStore;
using nn::Var;

namespace {

constexpr double kLayerNormEps = 1e-5;

std::string layer_prefix(int l) { return "strpe.layer" + std::to_string(l) + "."; }

}  // namespace

void ModelConfig::validate() const {
  if (d < 4 || d % 2 != 0) throw UsageError("model: d must be even and >= 4");
  if (layers < 1) throw UsageError("model: layers must be >= 1");
  if (ffn() < 1) throw UsageError("model: ffn_hidden must be positive");
  if (mix_heads < 1 || d % mix_heads != 0) {
    throw UsageError("model: mix_heads must divide d");
  }
  if (max_gen_len < 1) throw UsageError("model: max_gen_len must be >= 1");
  if (poi_dim < 1) throw UsageError("model: poi_dim must be >= 1");
}

ModelConfig ModelConfig::from_config(const KvConfig& cfg) {
  ModelConfig m;
  m.d = static_cast<int>(cfg.get_int("d", m.d));
  m.layers = static_cast<int>(cfg.get_int("layers", m.layers));
  m.ffn_hidden = static_cast<int>(cfg.get_int("ffn_hidden", m.ffn_hidden));
  m.mix_heads = static_cast<int>(cfg.get_int("mix_heads", m.mix_heads));
  m.use_strpe = cfg.get_bool("use_strpe", m.use_strpe);
  m.use_poi = cfg.get_bool("use_poi", m.use_poi);
  m.max_gen_len = static_cast<int>(cfg.get_int("max_gen_len", m.max_gen_len));
  m.poi_dim = static_cast<int>(cfg.get_int("poi_dim", m.poi_dim));
  return m;
}

KvConfig ModelConfig::to_config() const {
  KvConfig c;
  c.set("d", std::to_string(d));
  c.set("layers", std::to_string(layers));
  c.set("ffn_hidden", std::to_string(ffn()));
  c.set("mix_heads", std::to_string(mix_heads));
  c.set("use_strpe", use_strpe ? "true" : "false");
  c.set("use_poi", use_poi ? "true" : "false");
  c.set("max_gen_len", std::to_string(max_gen_len));
  c.set("poi_dim", std::to_string(poi_dim));
  return c;
}

bool AttentionMask::allows(std::size_t i, std::size_t j) const noexcept {
  if (i >= size() || j >= size()) return false;
  if (i < context) return j < context;
  return j <= i;
}

nn::BoolMat AttentionMask::matrix() const {
  const auto n = static_cast<Eigen::Index>(size());
  nn::BoolMat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      m(i, j) = allows(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return m;
}

std::vector<double> rotary_theta(int d) {
  std::vector<double> th(static_cast<std::size_t>(d / 2));
  for (int k = 1; k <= d / 2; ++k) {
    th[static_cast<std::size_t>(k - 1)] = std::pow(10000.0, -2.0 * k / d);
  }
  return th;
}

std::vector<double> rotary_apply(std::span<const double> v, std::span<const double> phi) {
  if (v.size() % 2 != 0 || phi.size() * 2 != v.size()) {
    throw std::invalid_argument("rotary_apply: need even length and d/2 angles");
  }
  const auto theta = rotary_theta(static_cast<int>(v.size()));
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const double a = phi[k] * theta[k];
    const double c = std::cos(a), s = std::sin(a);
    const double x = v[2 * k], y = v[2 * k + 1];
    out[2 * k] = x * c - y * s;
    out[2 * k + 1] = x * s + y * c;
  }
  return out;
}

template <typename T>
Mat<T> compute_phi(const geo::NormXY* xy, const Mat<T>& w_phi) {
  if (w_phi.cols() != 2) throw std::invalid_argument("compute_phi: W_phi must be (d/2) x 2");
  Mat<T> out = Mat<T>::Zero(1, w_phi.rows());
  if (xy == nullptr) return out;
  out.row(0) = (w_phi.col(0) * static_cast<T>(xy->x) + w_phi.col(1) * static_cast<T>(xy->y))
                   .transpose();
  return out;
}

template <typename T>
Mat<T> sinusoidal_encoding(std::size_t n, int d) {
  Mat<T> pe(static_cast<Eigen::Index>(n), d);
  for (std::size_t p = 0; p < n; ++p) {
    for (int i = 0; i < d / 2; ++i) {
      const double w = std::pow(10000.0, -2.0 * i / d);
      const auto r = static_cast<Eigen::Index>(p);
      pe(r, 2 * i) = static_cast<T>(std::sin(static_cast<double>(p) * w));
      pe(r, 2 * i + 1) = static_cast<T>(std::cos(static_cast<double>(p) * w));
    }
  }
  return pe;
}

template <typename T>
Model<T>::Model(ModelConfig cfg, const embedding::PoiVectorProvider& provider)
    : cfg_(cfg), provider_(&provider) {
  cfg_.validate();
  if (cfg_.use_poi && provider.dim() != static_cast<std::size_t>(cfg_.poi_dim)) {
    throw DataError("POI provider dimension " + std::to_string(provider.dim()) +
                    " does not match model poi_dim " + std::to_string(cfg_.poi_dim));
  }
  for (double t : rotary_theta(cfg_.d)) theta_.push_back(static_cast<T>(t));
}

template <typename T>
ParamStore<T> Model<T>::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  ParamStore<T> p;
  const int d = cfg_.d;
  const int h = cfg_.ffn();
  embedding::init_embedding_params(p, embedding::EmbeddingShape{d, cfg_.poi_dim}, rng);
  auto weight = [&](const std::string& name, int out, int in) {
    p.add(name, nn::random_normal<T>(out, in, 1.0 / std::sqrt(static_cast<double>(in)), rng));
  };
  auto zeros = [&](const std::string& name, int n) { p.add(name, Mat<T>::Zero(1, n)); };
  auto norm = [&](const std::string& name, int n) {
    p.add(name + ".gain", Mat<T>::Ones(1, n));
    p.add(name + ".bias", Mat<T>::Zero(1, n));
  };
  for (const char* m : {"q", "k", "v", "o"}) {
    weight(std::string("mix.attn.W_") + m, d, d);
    zeros(std::string("mix.attn.b_") + m, d);
  }
  norm("mix.ln1", d);
  weight("mix.ffn.W1", h, d);
  zeros("mix.ffn.b1", h);
  weight("mix.ffn.W2", d, h);
  zeros("mix.ffn.b2", d);
  norm("mix.ln2", d);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string pre = layer_prefix(l);
    p.add(pre + "W_phi", nn::random_normal<T>(d / 2, 2, 0.02, rng));
    weight(pre + "W_q", d, d);
    weight(pre + "W_k", d, d);
    weight(pre + "W_v", d, d);
    norm(pre + "ln1", d);
    weight(pre + "ffn.W1", h, d);
    zeros(pre + "ffn.b1", h);
    weight(pre + "ffn.W2", d, h);
    zeros(pre + "ffn.b2", d);
    norm(pre + "ln2", d);
  }
  auto head = [&](const std::string& name, int out) {
    weight(name + ".weight", out, d);
    zeros(name + ".bias", out);
  };
  head("head.xy", 2);
  head("head.temporal", 4);
  head("head.end_spatial", 1);
  head("head.end_temporal", 1);
  return p;
}

template <typename T>
PointCells Model<T>::effective(const PointCells& c) const {
  if (!c.coupling_ok()) {
    throw DataError("modality cells violate the spatial/POI mask coupling");
  }
  PointCells out = c;
  if (!cfg_.use_poi) out.poi = SpecialToken::kMask;
  return out;
}

template <typename T>
Var Model<T>::mix_modalities(Graph<T>& g, std::span<const PointCells> cells) const {
  std::vector<ModalityCell> flat;
  flat.reserve(cells.size() * 3);
  for (const auto& c0 : cells) {
    const PointCells c = effective(c0);
    flat.push_back(c.spatial);
    flat.push_back(c.temporal);
    flat.push_back(c.poi);
  }
  const Var x = embedding::embed_cells(g, std::span<const ModalityCell>(flat), *provider_);
  const T eps = static_cast<T>(kLayerNormEps);
  // Pre-LN encoder layer: the residual stream keeps the raw slot embeddings.
  const Var n1 = g.layer_norm(x, g.param("mix.ln1.gain"), g.param("mix.ln1.bias"), eps);
  const Var q = g.linear(n1, g.param("mix.attn.W_q"), g.param("mix.attn.b_q"));
  const Var k = g.linear(n1, g.param("mix.attn.W_k"), g.param("mix.attn.b_k"));
  const Var v = g.linear(n1, g.param("mix.attn.W_v"), g.param("mix.attn.b_v"));
  const Var att = g.grouped_attention(q, k, v, 3, cfg_.mix_heads);
  const Var x1 = g.add(x, g.linear(att, g.param("mix.attn.W_o"), g.param("mix.attn.b_o")));
  const Var n2 = g.layer_norm(x1, g.param("mix.ln2.gain"), g.param("mix.ln2.bias"), eps);
  const Var f = g.linear(g.relu(g.linear(n2, g.param("mix.ffn.W1"), g.param("mix.ffn.b1"))),
                         g.param("mix.ffn.W2"), g.param("mix.ffn.b2"));
  const Var x2 = g.add(x1, f);
  return g.group_mean_rows(x2, 3);
}

template <typename T>
Mat<T> Model<T>::phi_inputs(std::span<const PointCells> cells) {
  Mat<T> xy = Mat<T>::Zero(static_cast<Eigen::Index>(cells.size()), 2);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (const auto* p = std::get_if<geo::NormXY>(&cells[i].spatial)) {
      xy(static_cast<Eigen::Index>(i), 0) = static_cast<T>(p->x);
      xy(static_cast<Eigen::Index>(i), 1) = static_cast<T>(p->y);
    }
  }
  return xy;
}

template <typename T>
LayerTrace<T> Model<T>::strpe_layer(Graph<T>& g, Var e, Var xy, const nn::BoolMat& allow,
                                    int layer) const {
  const std::string pre = layer_prefix(layer);
  Var q = g.matmul_nt(e, g.param(pre + "W_q"));
  Var k = g.matmul_nt(e, g.param(pre + "W_k"));
  const Var v = g.matmul_nt(e, g.param(pre + "W_v"));
  if (cfg_.use_strpe) {
    const Var phi = g.matmul_nt(xy, g.param(pre + "W_phi"));
    const std::span<const T> th(theta_);
    q = g.rotary(q, phi, th);
    k = g.rotary(k, phi, th);
  }
  LayerTrace<T> tr;
  tr.logits = g.scale(g.matmul_nt(q, k), T(1) / std::sqrt(static_cast<T>(cfg_.d)));
  tr.probs = g.softmax_rows(tr.logits, &allow);
  const Var h = g.matmul(tr.probs, v);
  const T eps = static_cast<T>(kLayerNormEps);
  const Var a = g.layer_norm(g.add(h, e), g.param(pre + "ln1.gain"), g.param(pre + "ln1.bias"), eps);
  const Var f = g.linear(
      g.relu(g.linear(a, g.param(pre + "ffn.W1"), g.param(pre + "ffn.b1"))),
      g.param(pre + "ffn.W2"), g.param(pre + "ffn.b2"));
  tr.out = g.layer_norm(g.add(f, h), g.param(pre + "ln2.gain"), g.param(pre + "ln2.bias"), eps);
  return tr;
}

template <typename T>
ForwardResult<T> Model<T>::forward(Graph<T>& g, const InputSequence& in) const {
  if (in.cells.empty()) throw DataError("model: empty input sequence");
  if (in.cells.size() != in.mask.size()) {
    throw std::invalid_argument("model: mask size does not match the sequence length");
  }
  const std::span<const PointCells> cells(in.cells);
  ForwardResult<T> f;
  f.e = mix_modalities(g, cells);
  Var h = f.e;
  Var xy;
  if (cfg_.use_strpe) {
    xy = g.constant(phi_inputs(cells));
  } else {
    h = g.add(h, g.constant(sinusoidal_encoding<T>(in.cells.size(), cfg_.d)));
  }
  const nn::BoolMat allow = in.mask.matrix();
  for (int l = 0; l < cfg_.layers; ++l) {
    f.layers.push_back(strpe_layer(g, h, xy, allow, l));
    h = f.layers.back().out;
  }
  f.z = h;
  f.xy = g.linear(h, g.param("head.xy.weight"), g.param("head.xy.bias"));
  f.temporal =
      g.softplus(g.linear(h, g.param("head.temporal.weight"), g.param("head.temporal.bias")));
  f.end_spatial = g.sigmoid(
      g.linear(h, g.param("head.end_spatial.weight"), g.param("head.end_spatial.bias")));
  f.end_temporal = g.sigmoid(
      g.linear(h, g.param("head.end_temporal.weight"), g.param("head.end_temporal.bias")));
  return f;
}

template <typename T>
PointPrediction read_prediction(const Graph<T>& g, const ForwardResult<T>& f, Eigen::Index row) {
  PointPrediction p;
  p.xy = {static_cast<double>(g.value(f.xy)(row, 0)), static_cast<double>(g.value(f.xy)(row, 1))};
  for (int c = 0; c < 4; ++c) p.t[static_cast<std::size_t>(c)] = static_cast<double>(g.value(f.temporal)(row, c));
  p.end_spatial = static_cast<double>(g.value(f.end_spatial)(row, 0));
  p.end_temporal = static_cast<double>(g.value(f.end_temporal)(row, 0));
  return p;
}

template <typename T>
std::vector<PointPrediction> Model<T>::predict(const ParamStore<T>& params,
                                               const InputSequence& in) const {
  Graph<T> g(&params, false);
  const ForwardResult<T> f = forward(g, in);
  std::vector<PointPrediction> out;
  out.reserve(in.cells.size());
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(in.cells.size()); ++r) {
    out.push_back(read_prediction(g, f, r));
  }
  return out;
}

template <typename T>
Mat<T> Model<T>::encode(const ParamStore<T>& params, const InputSequence& in) const {
  Graph<T> g(&params, false);
  return g.value(forward(g, in).z);
}

const data::Poi& recover_poi(const geo::NormXY& xy, const geo::Region& region,
                             const data::PoiIndex& index) {
  if (index.empty()) throw DataError("recover_poi: empty POI index");
  return index.nearest(region.to_lnglat(xy));
}

template Mat<float> compute_phi<float>(const geo::NormXY*, const Mat<float>&);
template Mat<double> compute_phi<double>(const geo::NormXY*, const Mat<double>&);
template Mat<float> sinusoidal_encoding<float>(std::size_t, int);
template Mat<double> sinusoidal_encoding<double>(std::size_t, int);
template class Model<float>;
template class Model<double>;
template PointPrediction read_prediction<float>(const Graph<float>&, const ForwardResult<float>&,
                                                Eigen::Index);
template PointPrediction read_prediction<double>(const Graph<double>&,
                                                 const ForwardResult<double>&, Eigen::Index);

}  // namespace trajfm::model
