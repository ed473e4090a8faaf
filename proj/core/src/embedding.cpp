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

#include "trajfm/embedding.hpp"

#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "trajfm/error.hpp"

namespace trajfm::embedding {

using nn::Graph;
using nn::Mat;
using nn::ParamStore;
using nn::Var;

bool is_token(const ModalityCell& c) { return std::holds_alternative<SpecialToken>(c); }

bool is_token(const ModalityCell& c, SpecialToken t) {
  const auto* p = std::get_if<SpecialToken>(&c);
  return p != nullptr && *p == t;
}

bool PointCells::coupling_ok() const {
  if (is_token(spatial, SpecialToken::kMask)) return is_token(poi, SpecialToken::kMask);
  return true;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> poi_vector(const PoiVectorProvider& provider, std::string_view desc) {
  if (desc.empty()) throw DataError("POI description is empty");
  return provider.vector(desc);
}

SyntheticPoiProvider::SyntheticPoiProvider(std::uint64_t seed, std::size_t dim)
    : seed_(seed), dim_(dim) {
  if (dim_ == 0) throw DataError("POI provider dimension must be positive");
}

std::vector<double> SyntheticPoiProvider::vector(std::string_view desc) const {
  // splitmix64 finalizer over (hash, seed) seeds the generator.
  std::uint64_t z = fnv1a64(desc) ^ (seed_ + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  std::mt19937_64 rng(z);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(dim_);
  double norm2 = 0.0;
  for (auto& x : v) {
    x = dist(rng);
    norm2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

FilePoiProvider::FilePoiProvider(std::size_t dim,
                                 std::unordered_map<std::uint64_t, std::vector<double>> table)
    : dim_(dim), table_(std::move(table)) {
  for (const auto& [k, v] : table_) {
    if (v.size() != dim_) throw DataError("POI vector table: entry dimension mismatch");
  }
}

FilePoiProvider FilePoiProvider::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open POI vector table " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("dim=", 0) != 0) {
    throw DataError(path.string() + ":1: expected 'dim=<D>' header");
  }
  std::size_t dim = 0;
  {
    const char* b = line.data() + 4;
    const char* e = line.data() + line.size();
    if (!line.empty() && line.back() == '\r') --e;
    auto [ptr, ec] = std::from_chars(b, e, dim);
    if (ec != std::errc() || ptr != e || dim == 0) {
      throw DataError(path.string() + ":1: bad dimension");
    }
  }
  std::unordered_map<std::uint64_t, std::vector<double>> table;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": missing tab");
    }
    std::uint64_t key = 0;
    auto [kp, kec] = std::from_chars(line.data(), line.data() + tab, key, 16);
    if (kec != std::errc() || kp != line.data() + tab) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad hash");
    }
    std::vector<double> v;
    v.reserve(dim);
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p >= end) break;
      double x = 0.0;
      auto [np, ec] = std::from_chars(p, end, x);
      if (ec != std::errc()) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad float");
      }
      v.push_back(x);
      p = np;
    }
    if (v.size() != dim) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(dim) + " values");
    }
    table[key] = std::move(v);
  }
  return FilePoiProvider(dim, std::move(table));
}

void FilePoiProvider::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "dim=" << dim_ << '\n';
  std::vector<std::uint64_t> keys;
  for (const auto& [k, v] : table_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  char buf[40];
  for (std::uint64_t k : keys) {
    std::snprintf(buf, sizeof buf, "%016" PRIx64, k);
    out << buf << '\t';
    const auto& v = table_.at(k);
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      out << (i ? " " : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

FilePoiProvider FilePoiProvider::tabulate(const PoiVectorProvider& source,
                                          std::span<const std::string> descs) {
  std::unordered_map<std::uint64_t, std::vector<double>> table;
  for (const auto& d : descs) table[fnv1a64(d)] = source.vector(d);
  return FilePoiProvider(source.dim(), std::move(table));
}

std::vector<double> FilePoiProvider::vector(std::string_view desc) const {
  auto it = table_.find(fnv1a64(desc));
  if (it == table_.end()) {
    throw DataError("POI description not in vector table: '" + std::string(desc) + "'");
  }
  return it->second;
}

std::vector<double> CachingPoiProvider::vector(std::string_view desc) const {
  std::lock_guard lock(mu_);
  auto it = cache_.find(std::string(desc));
  if (it != cache_.end()) return it->second;
  auto v = inner_.vector(desc);
  cache_.emplace(std::string(desc), v);
  return v;
}

template <typename T>
void init_embedding_params(ParamStore<T>& params, const EmbeddingShape& shape,
                           std::mt19937_64& rng) {
  const int d = shape.d;
  auto affine = [&](const std::string& name, int out, int in) {
    params.add(name + ".weight",
               nn::random_normal<T>(out, in, 1.0 / std::sqrt(static_cast<double>(in)), rng));
    params.add(name + ".bias", Mat<T>::Zero(1, out));
  };
  affine("embed.spatial", d, 2);
  Mat<T> freqs = nn::random_normal<T>(kTemporalFeatures, kFourierFrequencies, 1.0, rng);
  freqs.row(kTemporalFeatures - 1) =
      nn::random_normal<T>(1, kFourierFrequencies, 0.01, rng);
  params.add("embed.temporal.freqs", std::move(freqs));
  affine("embed.temporal", d, kFourierWidth);
  affine("embed.poi", d, shape.poi_dim);
  params.add("embed.tokens", nn::random_normal<T>(kTokenCount, d, 1.0, rng));
}

template <typename T>
Var embed_spatial(Graph<T>& g, const Mat<T>& xy) {
  return g.linear(g.constant(xy), g.param("embed.spatial.weight"),
                  g.param("embed.spatial.bias"));
}

template <typename T>
Var fourier_block(Graph<T>& g, const Mat<T>& features) {
  return g.fourier(g.constant(features), g.param("embed.temporal.freqs"));
}

template <typename T>
Var embed_temporal(Graph<T>& g, const Mat<T>& features) {
  return g.linear(fourier_block(g, features), g.param("embed.temporal.weight"),
                  g.param("embed.temporal.bias"));
}

template <typename T>
Var embed_poi(Graph<T>& g, const Mat<T>& poi_vectors) {
  const Var w = g.param("embed.poi.weight");
  if (g.cols(w) != poi_vectors.cols()) {
    throw DataError("POI provider dimension " + std::to_string(poi_vectors.cols()) +
                    " does not match the projection input " + std::to_string(g.cols(w)));
  }
  return g.linear(g.constant(poi_vectors), w, g.param("embed.poi.bias"));
}

template <typename T>
Var embed_cells(Graph<T>& g, std::span<const ModalityCell> cells,
                const PoiVectorProvider& provider) {
  std::vector<std::size_t> xy_rows, tf_rows, poi_rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (std::holds_alternative<geo::NormXY>(cells[i])) xy_rows.push_back(i);
    if (std::holds_alternative<data::TemporalFeatures>(cells[i])) tf_rows.push_back(i);
    if (std::holds_alternative<PoiRef>(cells[i])) poi_rows.push_back(i);
  }
  using Src = typename Graph<T>::RowRef;
  std::vector<Src> refs(cells.size());
  if (!xy_rows.empty()) {
    Mat<T> xy(static_cast<Eigen::Index>(xy_rows.size()), 2);
    for (std::size_t r = 0; r < xy_rows.size(); ++r) {
      const auto& v = std::get<geo::NormXY>(cells[xy_rows[r]]);
      xy(static_cast<Eigen::Index>(r), 0) = static_cast<T>(v.x);
      xy(static_cast<Eigen::Index>(r), 1) = static_cast<T>(v.y);
    }
    const Var e = embed_spatial(g, xy);
    for (std::size_t r = 0; r < xy_rows.size(); ++r) {
      refs[xy_rows[r]] = {e, static_cast<Eigen::Index>(r)};
    }
  }
  if (!tf_rows.empty()) {
    Mat<T> f(static_cast<Eigen::Index>(tf_rows.size()), kTemporalFeatures);
    for (std::size_t r = 0; r < tf_rows.size(); ++r) {
      const auto a = std::get<data::TemporalFeatures>(cells[tf_rows[r]]).as_array();
      for (int c = 0; c < kTemporalFeatures; ++c) {
        f(static_cast<Eigen::Index>(r), c) = static_cast<T>(a[static_cast<std::size_t>(c)]);
      }
    }
    const Var e = embed_temporal(g, f);
    for (std::size_t r = 0; r < tf_rows.size(); ++r) {
      refs[tf_rows[r]] = {e, static_cast<Eigen::Index>(r)};
    }
  }
  if (!poi_rows.empty()) {
    const auto dim = static_cast<Eigen::Index>(provider.dim());
    Mat<T> pv(static_cast<Eigen::Index>(poi_rows.size()), dim);
    for (std::size_t r = 0; r < poi_rows.size(); ++r) {
      const PoiRef ref = std::get<PoiRef>(cells[poi_rows[r]]);
      if (ref.poi == nullptr) throw DataError("null POI reference in a modality cell");
      const auto v = poi_vector(provider, ref.poi->desc);
      if (static_cast<Eigen::Index>(v.size()) != dim) {
        throw DataError("POI provider returned a vector of the wrong dimension");
      }
      for (Eigen::Index c = 0; c < dim; ++c) {
        pv(static_cast<Eigen::Index>(r), c) = static_cast<T>(v[static_cast<std::size_t>(c)]);
      }
    }
    const Var e = embed_poi(g, pv);
    for (std::size_t r = 0; r < poi_rows.size(); ++r) {
      refs[poi_rows[r]] = {e, static_cast<Eigen::Index>(r)};
    }
  }
  const Var tokens = g.param("embed.tokens");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (const auto* t = std::get_if<SpecialToken>(&cells[i])) {
      refs[i] = {tokens, static_cast<Eigen::Index>(*t)};
    }
  }
  return g.gather_rows(std::span<const Src>(refs));
}

template <typename T>
Mat<T> embed_spatial(const geo::NormXY& xy, const ParamStore<T>& params) {
  Graph<T> g(&params, false);
  Mat<T> in(1, 2);
  in << static_cast<T>(xy.x), static_cast<T>(xy.y);
  return g.value(embed_spatial(g, in));
}

template <typename T>
Mat<T> embed_temporal(const data::TemporalFeatures& tf, const ParamStore<T>& params) {
  Graph<T> g(&params, false);
  const auto a = tf.as_array();
  Mat<T> in(1, kTemporalFeatures);
  for (int c = 0; c < kTemporalFeatures; ++c) in(0, c) = static_cast<T>(a[static_cast<std::size_t>(c)]);
  return g.value(embed_temporal(g, in));
}

template <typename T>
Mat<T> embed_poi(const data::Poi& poi, const PoiVectorProvider& provider,
                 const ParamStore<T>& params) {
  Graph<T> g(&params, false);
  const auto v = poi_vector(provider, poi.desc);
  Mat<T> in(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t c = 0; c < v.size(); ++c) in(0, static_cast<Eigen::Index>(c)) = static_cast<T>(v[c]);
  return g.value(embed_poi(g, in));
}

template <typename T>
Mat<T> embed_cell(const ModalityCell& cell, const PoiVectorProvider& provider,
                  const ParamStore<T>& params) {
  Graph<T> g(&params, false);
  return g.value(embed_cells(g, std::span<const ModalityCell>(&cell, 1), provider));
}

#define TRAJFM_EMBEDDING_INSTANTIATE(T)                                                \
  template void init_embedding_params<T>(ParamStore<T>&, const EmbeddingShape&,        \
                                         std::mt19937_64&);                            \
  template Var embed_spatial<T>(Graph<T>&, const Mat<T>&);                             \
  template Var embed_temporal<T>(Graph<T>&, const Mat<T>&);                            \
  template Var embed_poi<T>(Graph<T>&, const Mat<T>&);                                 \
  template Var fourier_block<T>(Graph<T>&, const Mat<T>&);                             \
  template Var embed_cells<T>(Graph<T>&, std::span<const ModalityCell>,                \
                              const PoiVectorProvider&);                               \
  template Mat<T> embed_spatial<T>(const geo::NormXY&, const ParamStore<T>&);          \
  template Mat<T> embed_temporal<T>(const data::TemporalFeatures&, const ParamStore<T>&); \
  template Mat<T> embed_poi<T>(const data::Poi&, const PoiVectorProvider&,             \
                               const ParamStore<T>&);                                  \
  template Mat<T> embed_cell<T>(const ModalityCell&, const PoiVectorProvider&,         \
                                const ParamStore<T>&);

TRAJFM_EMBEDDING_INSTANTIATE(float)
TRAJFM_EMBEDDING_INSTANTIATE(double)

#undef TRAJFM_EMBEDDING_INSTANTIATE

}  // namespace trajfm::embedding
