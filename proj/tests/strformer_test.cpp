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

#include <cmath>
#include <numbers>
#include <random>

#include "trajfm/error.hpp"
#include "trajfm/strformer.hpp"

namespace trajfm::model {
namespace {

using embedding::PointCells;
using embedding::SpecialToken;
using Md = nn::Mat<double>;

Md random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Md m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

ModelConfig small(int d = 16, int layers = 2) {
  ModelConfig c;
  c.d = d;
  c.layers = layers;
  c.mix_heads = 2;
  c.poi_dim = 8;
  return c;
}

// Plain reference for one layer: rotary q/k, masked softmax, then
// LN(FFN(LN(h + e)) + h).
Md reference_layer(const Md& e, const Md& xy, const nn::ParamStore<double>& p,
                   const AttentionMask& mask, bool strpe) {
  const Eigen::Index n = e.rows(), d = e.cols();
  const std::string pre = "strpe.layer0.";
  Md q = e * p.at(pre + "W_q").transpose();
  Md k = e * p.at(pre + "W_k").transpose();
  const Md v = e * p.at(pre + "W_v").transpose();
  if (strpe) {
    const Md phi = xy * p.at(pre + "W_phi").transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index m = 0; m < d / 2; ++m) {
        const double a = phi(i, m) * std::pow(10000.0, -2.0 * static_cast<double>(m + 1) / d);
        Eigen::Matrix2d R;
        R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        q.block(i, 2 * m, 1, 2) = (R * q.block(i, 2 * m, 1, 2).transpose()).transpose();
        k.block(i, 2 * m, 1, 2) = (R * k.block(i, 2 * m, 1, 2).transpose()).transpose();
      }
    }
  }
  Md h = Md::Zero(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    double mx = -1e300, sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask.allows(i, j)) mx = std::max(mx, q.row(i).dot(k.row(j)) / std::sqrt(double(d)));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!mask.allows(i, j)) continue;
      w[j] = std::exp(q.row(i).dot(k.row(j)) / std::sqrt(double(d)) - mx);
      sum += w[j];
    }
    for (Eigen::Index j = 0; j < n; ++j) h.row(i) += w[j] / sum * v.row(j);
  }
  auto ln = [&](const Md& x, const std::string& name) {
    Md out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double mu = x.row(i).mean();
      const double var = (x.row(i).array() - mu).square().mean();
      out.row(i) = ((x.row(i).array() - mu) / std::sqrt(var + 1e-5)).matrix();
      out.row(i) = out.row(i).cwiseProduct(p.at(name + ".gain")) + p.at(name + ".bias");
    }
    return out;
  };
  const Md a = ln(h + e, pre + "ln1");
  Md hid = a * p.at(pre + "ffn.W1").transpose();
  hid.rowwise() += p.at(pre + "ffn.b1").row(0);
  hid = hid.cwiseMax(0.0);
  Md f = hid * p.at(pre + "ffn.W2").transpose();
  f.rowwise() += p.at(pre + "ffn.b2").row(0);
  return ln(f + h, pre + "ln2");
}

TEST(Rotary, ThetaSchedule) {
  const auto th = rotary_theta(8);
  ASSERT_EQ(th.size(), 4u);
  EXPECT_DOUBLE_EQ(th[0], std::pow(10000.0, -0.25));
  EXPECT_DOUBLE_EQ(th[3], 1e-4);
}

TEST(Rotary, QuarterTurnAndIdentity) {
  // d = 2: theta_1 = 10000^-1, so phi = (pi/2) * 10000 gives a quarter turn.
  const std::vector<double> v{1.0, 0.0};
  const std::vector<double> phi{std::numbers::pi / 2 * 1e4};
  const auto r = rotary_apply(v, phi);
  EXPECT_NEAR(r[0], 0.0, 1e-12);
  EXPECT_NEAR(r[1], 1.0, 1e-12);
  const std::vector<double> w{0.3, -2.0, 5.0, 7.5};
  EXPECT_EQ(rotary_apply(w, std::vector<double>{0.0, 0.0}), w);
  EXPECT_THROW(rotary_apply(w, std::vector<double>{0.0}), std::invalid_argument);
}

TEST(Rotary, NormPreservedAndGraphOpAgrees) {
  std::mt19937_64 rng(11);
  const int d = 128;
  for (int trial = 0; trial < 20; ++trial) {
    const Md v = random_mat(1, d, rng);
    const Md phi = random_mat(1, d / 2, rng, 50.0);
    const auto r = rotary_apply(std::span<const double>(v.data(), d),
                                std::span<const double>(phi.data(), d / 2));
    const Eigen::Map<const Md> rm(r.data(), 1, d);
    EXPECT_NEAR(rm.norm(), v.norm(), 1e-12);
    nn::Graph<double> g(nullptr, false);
    const auto th = rotary_theta(d);
    const Md out = g.value(g.rotary(g.constant(v), g.constant(phi), std::span<const double>(th)));
    EXPECT_LT((out - rm).norm(), 1e-12);
  }
}

TEST(Phi, LinearAndAbsentIsZero) {
  std::mt19937_64 rng(2);
  const Md w = random_mat(8, 2, rng);
  EXPECT_EQ(compute_phi<double>(nullptr, w), Md::Zero(1, 8));
  const geo::NormXY origin{0.0, 0.0};
  EXPECT_EQ(compute_phi<double>(&origin, w), Md::Zero(1, 8));
  const geo::NormXY a{0.3, -0.1}, b{-0.7, 0.4}, ab{a.x + b.x, a.y + b.y};
  EXPECT_LT((compute_phi<double>(&ab, w) - compute_phi<double>(&a, w) - compute_phi<double>(&b, w))
                .norm(),
            1e-14);
}

TEST(Mask, BlockStructure) {
  const AttentionMask m{3, 4};
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 7; ++j) {
      bool expect;
      if (i < 3) expect = j < 3;
      else expect = j <= i;
      EXPECT_EQ(m.allows(i, j), expect) << i << "," << j;
    }
  }
  EXPECT_FALSE(m.allows(7, 0));
  EXPECT_EQ(m.matrix().count(), 9 + 4 * 3 + 10);
}

TEST(Sinusoidal, KnownEntries) {
  const Md pe = sinusoidal_encoding<double>(3, 4);
  EXPECT_EQ(pe.row(0), (Md(1, 4) << 0, 1, 0, 1).finished());
  EXPECT_DOUBLE_EQ(pe(1, 0), std::sin(1.0));
  EXPECT_DOUBLE_EQ(pe(2, 3), std::cos(2.0 * 0.01));
}

TEST(Config, ValidateAndRoundTrip) {
  ModelConfig c = small(32, 3);
  c.use_poi = false;
  c.max_gen_len = 40;
  const ModelConfig back = ModelConfig::from_config(c.to_config());
  EXPECT_EQ(back.ffn_hidden, 128);
  c.ffn_hidden = 128;
  EXPECT_EQ(back, c);
  ModelConfig bad = small();
  bad.d = 15;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = small();
  bad.mix_heads = 3;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = small();
  bad.layers = 0;
  EXPECT_THROW(bad.validate(), UsageError);
}

TEST(Model, ProviderDimensionChecked) {
  const embedding::SyntheticPoiProvider prov(0, 4);
  EXPECT_THROW(Model<double>(small(), prov), DataError);
  ModelConfig no_poi = small();
  no_poi.use_poi = false;
  EXPECT_NO_THROW(Model<double>(no_poi, prov));
}

struct Fixture : ::testing::Test {
  embedding::SyntheticPoiProvider prov{0, 8};
  std::vector<data::Poi> pois;

  void SetUp() override {
    for (int i = 0; i < 3; ++i) {
      data::Poi p;
      p.id = "p" + std::to_string(i);
      p.desc = "poi " + std::to_string(i) + "; shop; road";
      pois.push_back(p);
    }
  }

  std::vector<PointCells> random_points(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<PointCells> out;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back({geo::NormXY{u(rng), u(rng)},
                     data::TemporalFeatures{static_cast<int>(i % 7), static_cast<int>(i % 24),
                                            static_cast<int>(i * 3 % 60), 1.5 * double(i)},
                     embedding::PoiRef{&pois[i % pois.size()]}});
    }
    return out;
  }
};

TEST_F(Fixture, LayerMatchesReference) {
  for (bool strpe : {true, false}) {
    ModelConfig c = small();
    c.use_strpe = strpe;
    const Model<double> m(c, prov);
    const auto p = m.init_params(5);
    std::mt19937_64 rng(9);
    const Md e = random_mat(5, 16, rng);
    const Md xy = random_mat(5, 2, rng, 0.5);
    const AttentionMask mask{3, 2};
    nn::Graph<double> g(&p, false);
    const auto tr = m.strpe_layer(g, g.constant(e), g.constant(xy), mask.matrix(), 0);
    EXPECT_LT((g.value(tr.out) - reference_layer(e, xy, p, mask, strpe)).norm(), 1e-10);
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(g.value(tr.probs).row(i).sum(), 1.0, 1e-12);
    EXPECT_EQ(g.value(tr.probs)(0, 4), 0.0);
    EXPECT_EQ(g.value(tr.probs)(3, 4), 0.0);
  }
}

TEST_F(Fixture, SingleElementAttendsToItself) {
  const Model<double> m(small(), prov);
  auto p = m.init_params(1);
  std::mt19937_64 rng(3);
  const Md e = random_mat(1, 16, rng);
  // Make the layer transparent after attention: LN1 output unused, FFN zero.
  p.at("strpe.layer0.ffn.W2").setZero();
  nn::Graph<double> g(&p, false);
  const AttentionMask mask{1, 0};
  const auto tr = m.strpe_layer(g, g.constant(e), g.constant(Md::Zero(1, 2)), mask.matrix(), 0);
  EXPECT_EQ(g.value(tr.probs)(0, 0), 1.0);
  // out = LN2(W_v e), so compare against the normalized value projection.
  const Md h = e * p.at("strpe.layer0.W_v").transpose();
  const double mu = h.mean();
  const double sd = std::sqrt((h.array() - mu).square().mean() + 1e-5);
  EXPECT_LT((g.value(tr.out) - ((h.array() - mu) / sd).matrix()).norm(), 1e-10);
}

TEST_F(Fixture, ZeroQueryGivesUniformAttention) {
  const Model<double> m(small(), prov);
  auto p = m.init_params(2);
  p.at("strpe.layer0.W_q").setZero();
  std::mt19937_64 rng(4);
  const Md e = random_mat(6, 16, rng);
  nn::Graph<double> g(&p, false);
  const auto tr = m.strpe_layer(g, g.constant(e), g.constant(random_mat(6, 2, rng)),
                                AttentionMask{6, 0}.matrix(), 0);
  EXPECT_LT((g.value(tr.probs) - Md::Constant(6, 6, 1.0 / 6)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST_F(Fixture, TranslationLeavesLogitsUnchanged) {
  const Model<double> m(small(32, 1), prov);
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = m.init_params(100 + trial);
    // Large W_phi so the rotation is far from identity.
    p.at("strpe.layer0.W_phi") = random_mat(16, 2, rng, 3.0);
    const Md e = random_mat(7, 32, rng);
    const Md xy = random_mat(7, 2, rng, 0.5);
    const Md shift = random_mat(1, 2, rng, 2.0);
    Md moved = xy;
    moved.rowwise() += shift.row(0);
    nn::Graph<double> g(&p, false);
    const auto allow = AttentionMask{4, 3}.matrix();
    const auto a = m.strpe_layer(g, g.constant(e), g.constant(xy), allow, 0);
    const auto b = m.strpe_layer(g, g.constant(e), g.constant(moved), allow, 0);
    EXPECT_LT((g.value(a.logits) - g.value(b.logits)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((g.value(a.out) - g.value(b.out)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST_F(Fixture, AllDeniedRowIsNumericalError) {
  const Model<double> m(small(), prov);
  const auto p = m.init_params(0);
  nn::Graph<double> g(&p, false);
  nn::BoolMat allow = AttentionMask{2, 0}.matrix();
  allow.row(1).setConstant(false);
  std::mt19937_64 rng(1);
  EXPECT_THROW(m.strpe_layer(g, g.constant(random_mat(2, 16, rng)), g.constant(Md::Zero(2, 2)),
                             allow, 0),
               NumericalError);
}

TEST_F(Fixture, MixingIdentityWhenResidualBranchesZeroed) {
  const Model<double> m(small(), prov);
  auto p = m.init_params(3);
  for (const char* name : {"mix.attn.W_o", "mix.attn.b_o", "mix.ffn.W2", "mix.ffn.b2"}) {
    p.at(name).setZero();
  }
  std::mt19937_64 rng(8);
  const auto pts = random_points(4, rng);
  nn::Graph<double> g(&p, false);
  const Md mixed = g.value(m.mix_modalities(g, pts));
  ASSERT_EQ(mixed.rows(), 4);
  ASSERT_EQ(mixed.cols(), 16);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Md expect = (embedding::embed_cell<double>(pts[i].spatial, prov, p) +
                       embedding::embed_cell<double>(pts[i].temporal, prov, p) +
                       embedding::embed_cell<double>(pts[i].poi, prov, p)) /
                      3.0;
    EXPECT_LT((mixed.row(static_cast<Eigen::Index>(i)) - expect).norm(), 1e-12);
  }
  // Three identical slots pool back to the shared vector.
  const std::vector<PointCells> masked{PointCells::all(SpecialToken::kMask)};
  nn::Graph<double> g2(&p, false);
  EXPECT_LT((g2.value(m.mix_modalities(g2, masked)) - p.at("embed.tokens").row(0)).norm(), 1e-12);
}

TEST_F(Fixture, MixingIgnoresSlotOrder) {
  const Model<double> m(small(), prov);
  const auto p = m.init_params(4);
  std::mt19937_64 rng(6);
  const auto pts = random_points(3, rng);
  std::vector<PointCells> permuted;
  for (const auto& c : pts) permuted.push_back({c.temporal, c.poi, c.spatial});
  nn::Graph<double> g(&p, false);
  const Md a = g.value(m.mix_modalities(g, pts));
  const Md b = g.value(m.mix_modalities(g, permuted));
  EXPECT_LT((a - b).norm(), 1e-12);
}

TEST_F(Fixture, UsePoiFalseMasksPoiSlot) {
  ModelConfig c = small();
  c.use_poi = false;
  const Model<double> m(c, prov);
  const auto p = m.init_params(4);
  std::mt19937_64 rng(6);
  auto pts = random_points(2, rng);
  auto masked = pts;
  for (auto& x : masked) x.poi = SpecialToken::kMask;
  nn::Graph<double> g(&p, false);
  EXPECT_EQ(g.value(m.mix_modalities(g, pts)), g.value(m.mix_modalities(g, masked)));
}

TEST_F(Fixture, PhiInputsZeroForTokens) {
  std::mt19937_64 rng(1);
  auto pts = random_points(3, rng);
  pts[1].spatial = SpecialToken::kMask;
  pts[1].poi = SpecialToken::kMask;
  const Md xy = Model<double>::phi_inputs(pts);
  EXPECT_EQ(xy.row(1), Md::Zero(1, 2));
  EXPECT_EQ(xy(0, 0), std::get<geo::NormXY>(pts[0].spatial).x);
}

TEST_F(Fixture, EncodeShapesAndDeterminism) {
  const Model<double> m(small(), prov);
  const auto p = m.init_params(7);
  std::mt19937_64 rng(5);
  for (std::size_t n : {1u, 5u, 120u}) {
    const InputSequence in{random_points(n, rng), AttentionMask{n, 0}};
    const Md z = m.encode(p, in);
    EXPECT_EQ(z.rows(), static_cast<Eigen::Index>(n));
    EXPECT_EQ(z, m.encode(p, in));
  }
  const InputSequence bad{random_points(3, rng), AttentionMask{2, 0}};
  EXPECT_THROW(m.encode(p, bad), std::invalid_argument);
  EXPECT_THROW(m.encode(p, InputSequence{}), DataError);
}

TEST_F(Fixture, LayersDoNotShareParameters) {
  const Model<double> m(small(), prov);
  auto p = m.init_params(7);
  std::mt19937_64 rng(5);
  const InputSequence in{random_points(4, rng), AttentionMask{4, 0}};
  const Md before = m.encode(p, in);
  const Md layer0_wq = p.at("strpe.layer0.W_q");
  p.at("strpe.layer1.W_v").setZero();
  p.at("strpe.layer1.W_q").setZero();
  EXPECT_GT((m.encode(p, in) - before).norm(), 1e-6);
  EXPECT_EQ(p.at("strpe.layer0.W_q"), layer0_wq);
}

TEST_F(Fixture, ContextIgnoresGeneration) {
  const Model<double> m(small(), prov);
  const auto p = m.init_params(7);
  std::mt19937_64 rng(5);
  auto pts = random_points(6, rng);
  const InputSequence a{pts, AttentionMask{3, 3}};
  pts[4] = PointCells::all(SpecialToken::kEnd);
  pts[5].spatial = geo::NormXY{0.9, 0.9};
  const InputSequence b{pts, AttentionMask{3, 3}};
  const Md za = m.encode(p, a), zb = m.encode(p, b);
  EXPECT_EQ(za.topRows(4), zb.topRows(4));
  EXPECT_NE(za.row(4), zb.row(4));
}

TEST_F(Fixture, HeadsDegenerateToBias) {
  const Model<double> m(small(), prov);
  auto p = m.init_params(7);
  for (const char* h : {"head.xy", "head.temporal", "head.end_spatial", "head.end_temporal"}) {
    p.at(std::string(h) + ".weight").setZero();
  }
  p.at("head.xy.bias") << 0.25, -0.5;
  p.at("head.temporal.bias") << -40.0, 0.0, 1.0, 3.0;
  p.at("head.end_spatial.bias")(0, 0) = 2.0;
  std::mt19937_64 rng(5);
  const auto preds = m.predict(p, InputSequence{random_points(3, rng), AttentionMask{3, 0}});
  for (const auto& q : preds) {
    EXPECT_EQ(q.xy.x, 0.25);
    EXPECT_EQ(q.xy.y, -0.5);
    EXPECT_GT(q.t[0], 0.0);
    EXPECT_NEAR(q.t[1], std::log(2.0), 1e-15);
    EXPECT_NEAR(q.end_spatial, 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
    EXPECT_EQ(q.end_temporal, 0.5);
  }
}

}  // namespace
}  // namespace trajfm::model
