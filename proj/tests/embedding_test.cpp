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

#include <filesystem>
#include <random>

#include "trajfm/embedding.hpp"
#include "trajfm/error.hpp"

namespace trajfm::embedding {
namespace {

using Md = nn::Mat<double>;

nn::ParamStore<double> fresh(int d = 128, int poi_dim = 64, std::uint64_t seed = 1) {
  nn::ParamStore<double> p;
  std::mt19937_64 rng(seed);
  init_embedding_params(p, EmbeddingShape{d, poi_dim}, rng);
  return p;
}

data::Poi poi(const std::string& id, const std::string& name) {
  data::Poi p;
  p.id = id;
  p.name = name;
  p.category = "park";
  p.address = "1 Rd";
  p.desc = data::poi_description(p.name, p.category, p.address);
  return p;
}

TEST(Fnv1a, PublishedVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Params, ShapesFollowConfiguration) {
  const auto p = fresh(32, 48);
  EXPECT_EQ(p.at("embed.spatial.weight").rows(), 32);
  EXPECT_EQ(p.at("embed.spatial.weight").cols(), 2);
  EXPECT_EQ(p.at("embed.temporal.freqs").rows(), kTemporalFeatures);
  EXPECT_EQ(p.at("embed.temporal.freqs").cols(), kFourierFrequencies);
  EXPECT_EQ(p.at("embed.temporal.weight").cols(), kFourierWidth);
  EXPECT_EQ(p.at("embed.poi.weight").cols(), 48);
  EXPECT_EQ(p.at("embed.tokens").rows(), kTokenCount);
  EXPECT_EQ(p.at("embed.tokens").cols(), 32);
  EXPECT_EQ(p.at("embed.spatial.bias").norm(), 0.0);
}

TEST(Spatial, AffineBehaviour) {
  auto p = fresh();
  const Md e = embed_spatial<double>({0.3, -0.7}, p);
  EXPECT_EQ(e.cols(), 128);
  const Md zero = embed_spatial<double>({0.0, 0.0}, p);
  const Md twice = embed_spatial<double>({0.6, -1.4}, p);
  EXPECT_LT(((twice - zero) - 2.0 * (e - zero)).norm(), 1e-12);

  p.at("embed.spatial.weight").setZero();
  p.at("embed.spatial.bias").setConstant(0.25);
  EXPECT_EQ(embed_spatial<double>({5.0, 9.0}, p), Md::Constant(1, 128, 0.25));
}

TEST(Temporal, ZeroFeatureGivesUnitCosines) {
  const auto p = fresh();
  nn::Graph<double> g(&p, false);
  const Md block = g.value(fourier_block<double>(g, Md::Zero(1, 4)));
  ASSERT_EQ(block.cols(), kFourierWidth);
  for (int f = 0; f < kTemporalFeatures; ++f) {
    for (int k = 0; k < kFourierFrequencies; ++k) {
      EXPECT_EQ(block(0, f * 2 * kFourierFrequencies + k), 1.0);
      EXPECT_EQ(block(0, f * 2 * kFourierFrequencies + kFourierFrequencies + k), 0.0);
    }
  }
}

TEST(Temporal, BlockMatchesClosedFormAndStaysBounded) {
  const auto p = fresh();
  const Md& b = p.at("embed.temporal.freqs");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 200.0);
  for (int trial = 0; trial < 20; ++trial) {
    Md feats(1, 4);
    for (int c = 0; c < 4; ++c) feats(0, c) = u(rng);
    nn::Graph<double> g(&p, false);
    const Md block = g.value(fourier_block(g, feats));
    EXPECT_LE(block.cwiseAbs().maxCoeff(), 1.0);
    for (int f = 0; f < 4; ++f) {
      for (int k = 0; k < kFourierFrequencies; ++k) {
        const double arg = 2.0 * M_PI * b(f, k) * feats(0, f);
        EXPECT_NEAR(block(0, f * 32 + k), std::cos(arg), 1e-12);
        EXPECT_NEAR(block(0, f * 32 + 16 + k), std::sin(arg), 1e-12);
      }
    }
  }
}

TEST(Temporal, DtMinAloneChangesOutput) {
  const auto p = fresh();
  const Md a = embed_temporal<double>({2, 9, 15, 0.0}, p);
  const Md b = embed_temporal<double>({2, 9, 15, 12.5}, p);
  EXPECT_GT((a - b).norm(), 1e-6);
  EXPECT_EQ(a.cols(), 128);
}

TEST(Providers, SyntheticIsDeterministicUnitNorm) {
  const SyntheticPoiProvider prov(7, 64);
  const auto v1 = poi_vector(prov, "Park A; park; 1 Rd");
  const auto v2 = poi_vector(prov, "Park A; park; 1 Rd");
  const auto other = poi_vector(prov, "Park B; park; 1 Rd");
  EXPECT_EQ(v1, v2);
  EXPECT_NE(v1, other);
  ASSERT_EQ(v1.size(), 64u);
  double n2 = 0.0;
  for (double x : v1) n2 += x * x;
  EXPECT_NEAR(std::sqrt(n2), 1.0, 1e-9);
  EXPECT_NE(poi_vector(SyntheticPoiProvider(8, 64), "Park A; park; 1 Rd"), v1);
  EXPECT_THROW(poi_vector(prov, ""), DataError);
}

TEST(Providers, FileTableRoundTripsExactly) {
  const SyntheticPoiProvider source(3, 64);
  const std::vector<std::string> descs = {"Park A; park; 1 Rd", "Mall; shopping; 9 Ave"};
  const FilePoiProvider table = FilePoiProvider::tabulate(source, descs);
  const auto path = std::filesystem::temp_directory_path() / "trajfm_poi_table.txt";
  table.save(path);
  const FilePoiProvider loaded = FilePoiProvider::load(path);
  std::filesystem::remove(path);
  EXPECT_EQ(loaded.dim(), 64u);
  EXPECT_EQ(loaded.size(), 2u);
  for (const auto& d : descs) EXPECT_EQ(loaded.vector(d), source.vector(d));
  EXPECT_THROW(loaded.vector("unknown; x; y"), DataError);
}

TEST(Providers, CachingMatchesInner) {
  const SyntheticPoiProvider inner(2, 16);
  const CachingPoiProvider cached(inner);
  EXPECT_EQ(cached.dim(), 16u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(cached.vector("x; y; z"), inner.vector("x; y; z"));
}

TEST(Poi, ProjectionAndDeterminism) {
  auto p = fresh();
  const SyntheticPoiProvider prov(0, 64);
  const Md a = embed_poi<double>(poi("p1", "Park A"), prov, p);
  const Md b = embed_poi<double>(poi("p2", "Park A"), prov, p);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.cols(), 128);
  p.at("embed.poi.weight").setZero();
  p.at("embed.poi.bias").setConstant(-1.5);
  EXPECT_EQ(embed_poi<double>(poi("p3", "Other"), prov, p), Md::Constant(1, 128, -1.5));
}

TEST(Poi, DimensionMismatchIsDataError) {
  const auto p = fresh(128, 64);
  const SyntheticPoiProvider wrong(0, 32);
  EXPECT_THROW(embed_poi<double>(poi("p1", "Park A"), wrong, p), DataError);
}

TEST(Cells, TokensUseSharedTable) {
  const auto p = fresh();
  const SyntheticPoiProvider prov(0, 64);
  const Md& tokens = p.at("embed.tokens");
  EXPECT_EQ(embed_cell<double>(SpecialToken::kMask, prov, p), tokens.row(0));
  EXPECT_NE(embed_cell<double>(SpecialToken::kStart, prov, p),
            embed_cell<double>(SpecialToken::kEnd, prov, p));
  const geo::NormXY xy{0.1, 0.2};
  EXPECT_EQ(embed_cell<double>(xy, prov, p), embed_spatial<double>(xy, p));
  const data::Poi q = poi("p1", "Park A");
  EXPECT_EQ(embed_cell<double>(PoiRef{&q}, prov, p), embed_poi<double>(q, prov, p));
}

TEST(Cells, BatchedEmbeddingPreservesRowOrder) {
  const auto p = fresh(16, 64);
  const SyntheticPoiProvider prov(0, 64);
  const data::Poi q = poi("p1", "Park A");
  const std::vector<ModalityCell> cells = {
      geo::NormXY{0.5, 0.1}, SpecialToken::kEnd, data::TemporalFeatures{1, 2, 3, 4},
      PoiRef{&q},            SpecialToken::kMask, geo::NormXY{-0.2, 0.3}};
  nn::Graph<double> g(&p, false);
  const Md batch = g.value(embed_cells<double>(g, std::span<const ModalityCell>(cells), prov));
  ASSERT_EQ(batch.rows(), 6);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    EXPECT_LT((batch.row(static_cast<Eigen::Index>(i)) - embed_cell<double>(cells[i], prov, p)).norm(), 1e-12)
        << "row " << i;
  }
}

TEST(Cells, CouplingRule) {
  const data::Poi q = poi("p1", "Park A");
  PointCells ok{geo::NormXY{}, SpecialToken::kMask, PoiRef{&q}};
  EXPECT_TRUE(ok.coupling_ok());
  PointCells bad{SpecialToken::kMask, data::TemporalFeatures{}, PoiRef{&q}};
  EXPECT_FALSE(bad.coupling_ok());
  EXPECT_TRUE(PointCells::all(SpecialToken::kStart).coupling_ok());
  EXPECT_TRUE(is_token(bad.spatial, SpecialToken::kMask));
  EXPECT_FALSE(is_token(ok.spatial));
}

}  // namespace
}  // namespace trajfm::embedding
