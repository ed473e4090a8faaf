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

#include "trajfm/tensor.hpp"

#include <stdexcept>

namespace trajfm::nn {

template <typename T>
Mat<T>& ParamStore<T>::add(const std::string& name, Mat<T> value) {
  if (index_.contains(name)) {
    throw std::invalid_argument("duplicate parameter name " + name);
  }
  index_.emplace(name, entries_.size());
  entries_.push_back({name, std::move(value)});
  return entries_.back().value;
}

template <typename T>
std::size_t ParamStore<T>::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

template <typename T>
GradStore<T>::GradStore(const ParamStore<T>& params) {
  grads_.reserve(params.size());
  for (const auto& e : params) {
    grads_.push_back(Mat<T>::Zero(e.value.rows(), e.value.cols()));
  }
}

template <typename T>
void GradStore<T>::zero() {
  for (auto& g : grads_) g.setZero();
}

template <typename T>
bool GradStore<T>::all_finite() const {
  for (const auto& g : grads_) {
    if (!g.allFinite()) return false;
  }
  return true;
}

template <typename T>
Mat<T> random_normal(Eigen::Index rows, Eigen::Index cols, double stddev,
                     std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
  return m;
}

template class ParamStore<float>;
template class ParamStore<double>;
template class GradStore<float>;
template class GradStore<double>;
template Mat<float> random_normal<float>(Eigen::Index, Eigen::Index, double,
                                         std::mt19937_64&);
template Mat<double> random_normal<double>(Eigen::Index, Eigen::Index, double,
                                           std::mt19937_64&);

}  // namespace trajfm::nn
