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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "trajfm/autodiff.hpp"
#include "trajfm/data.hpp"
#include "trajfm/geo.hpp"

namespace trajfm::embedding {

enum class SpecialToken : std::uint8_t { kMask = 0, kStart = 1, kEnd = 2 };

inline constexpr int kTokenCount = 3;
inline constexpr int kTemporalFeatures = 4;
inline constexpr int kFourierFrequencies = 16;
inline constexpr int kFourierWidth = kTemporalFeatures * 2 * kFourierFrequencies;  // 128

// Non-owning reference to a POI; the POI storage (dataset or index) must
// outlive every cell that points into it.
struct PoiRef {
  const data::Poi* poi = nullptr;
};

using ModalityCell = std::variant<geo::NormXY, data::TemporalFeatures, PoiRef, SpecialToken>;

bool is_token(const ModalityCell& c);
bool is_token(const ModalityCell& c, SpecialToken t);

// The three modality slots of one point (spatial, temporal, POI).
struct PointCells {
  ModalityCell spatial = SpecialToken::kMask;
  ModalityCell temporal = SpecialToken::kMask;
  ModalityCell poi = SpecialToken::kMask;

  static PointCells all(SpecialToken t) { return {t, t, t}; }
  // Enforces the coupling rule: a masked spatial slot implies a masked POI slot.
  bool coupling_ok() const;
};

// ---------------------------------------------------------------------------
// POI text-vector providers.

std::uint64_t fnv1a64(std::string_view bytes);

class PoiVectorProvider {
 public:
  virtual ~PoiVectorProvider() = default;
  virtual std::size_t dim() const = 0;
  // Deterministic for a given desc; throws DataError when unavailable.
  virtual std::vector<double> vector(std::string_view desc) const = 0;
};

// Hashes desc (FNV-1a 64 mixed with a seed) into a pseudo-random unit vector.
class SyntheticPoiProvider final : public PoiVectorProvider {
 public:
  explicit SyntheticPoiProvider(std::uint64_t seed = 0, std::size_t dim = 64);
  std::size_t dim() const override { return dim_; }
  std::vector<double> vector(std::string_view desc) const override;

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

// Lookup table keyed by FNV-1a 64 of desc. File format: a `dim=<D>` line,
// then `<16-hex-digit hash>\t<D space-separated floats>` per entry.
class FilePoiProvider final : public PoiVectorProvider {
 public:
  FilePoiProvider(std::size_t dim, std::unordered_map<std::uint64_t, std::vector<double>> table);

  static FilePoiProvider load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  // Builds a table for the given descriptions using another provider.
  static FilePoiProvider tabulate(const PoiVectorProvider& source,
                                  std::span<const std::string> descs);

  std::size_t dim() const override { return dim_; }
  std::vector<double> vector(std::string_view desc) const override;
  std::size_t size() const noexcept { return table_.size(); }

 private:
  std::size_t dim_;
  std::unordered_map<std::uint64_t, std::vector<double>> table_;
};

// Memoizing decorator; safe for concurrent readers.
class CachingPoiProvider final : public PoiVectorProvider {
 public:
  explicit CachingPoiProvider(const PoiVectorProvider& inner) : inner_(inner) {}
  std::size_t dim() const override { return inner_.dim(); }
  std::vector<double> vector(std::string_view desc) const override;

 private:
  const PoiVectorProvider& inner_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::vector<double>> cache_;
};

// ---------------------------------------------------------------------------
// Parameters and embedders.

struct EmbeddingShape {
  int d = 128;
  int poi_dim = 64;
};

// Adds embed.* parameters: affine weights ~ normal(0, 1/sqrt(fan_in)),
// biases 0, Fourier frequencies ~ normal(0, 1) (dt_min row: 0.01), token
// table ~ normal(0, 1).
template <typename T>
void init_embedding_params(nn::ParamStore<T>& params, const EmbeddingShape& shape,
                           std::mt19937_64& rng);

// Batched embedders over rows of constant inputs; each returns an N x d node.
template <typename T>
nn::Var embed_spatial(nn::Graph<T>& g, const nn::Mat<T>& xy);
template <typename T>
nn::Var embed_temporal(nn::Graph<T>& g, const nn::Mat<T>& features);
template <typename T>
nn::Var embed_poi(nn::Graph<T>& g, const nn::Mat<T>& poi_vectors);
// The three Fourier blocks before the affine map (N x 128).
template <typename T>
nn::Var fourier_block(nn::Graph<T>& g, const nn::Mat<T>& features);

// Embeds arbitrary cells (tokens dispatch to the shared token table) and
// returns a cells.size() x d node, row order preserved.
template <typename T>
nn::Var embed_cells(nn::Graph<T>& g, std::span<const ModalityCell> cells,
                    const PoiVectorProvider& provider);

// Single-value conveniences (forward only); each returns a 1 x d row.
template <typename T>
nn::Mat<T> embed_spatial(const geo::NormXY& xy, const nn::ParamStore<T>& params);
template <typename T>
nn::Mat<T> embed_temporal(const data::TemporalFeatures& tf, const nn::ParamStore<T>& params);
template <typename T>
nn::Mat<T> embed_poi(const data::Poi& poi, const PoiVectorProvider& provider,
                     const nn::ParamStore<T>& params);
template <typename T>
nn::Mat<T> embed_cell(const ModalityCell& cell, const PoiVectorProvider& provider,
                      const nn::ParamStore<T>& params);

std::vector<double> poi_vector(const PoiVectorProvider& provider, std::string_view desc);

}  // namespace trajfm::embedding
