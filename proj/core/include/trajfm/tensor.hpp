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

#include <Eigen/Core>
#include <cstddef>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace trajfm::nn {

// Row-major dense matrix; vectors are 1 x n rows.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Named learnable tensors in insertion (canonical) order.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Mat<T> value;
  };

  // Throws std::invalid_argument on a duplicate name.
  Mat<T>& add(const std::string& name, Mat<T> value);

  bool contains(const std::string& name) const { return index_.contains(name); }
  std::size_t index_of(const std::string& name) const;  // throws std::out_of_range
  Mat<T>& at(const std::string& name) { return entries_[index_of(name)].value; }
  const Mat<T>& at(const std::string& name) const {
    return entries_[index_of(name)].value;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const noexcept;
  Entry& operator[](std::size_t i) { return entries_[i]; }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Gradients aligned one-to-one (by position) with a ParamStore.
template <typename T>
class GradStore {
 public:
  GradStore() = default;
  explicit GradStore(const ParamStore<T>& params);

  void zero();
  std::size_t size() const noexcept { return grads_.size(); }
  Mat<T>& operator[](std::size_t i) { return grads_[i]; }
  const Mat<T>& operator[](std::size_t i) const { return grads_[i]; }
  bool all_finite() const;

 private:
  std::vector<Mat<T>> grads_;
};

// normal(0, stddev) fill.
template <typename T>
Mat<T> random_normal(Eigen::Index rows, Eigen::Index cols, double stddev,
                     std::mt19937_64& rng);

}  // namespace trajfm::nn
