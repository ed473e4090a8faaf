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

#include "trajfm/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "trajfm/error.hpp"

namespace trajfm::nn {

template <typename T>
Adam<T>::Adam(const ParamStore<T>& params, AdamHyper hyper) : hyper_(hyper) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& e : params) {
    m_.push_back(Mat<T>::Zero(e.value.rows(), e.value.cols()));
    v_.push_back(Mat<T>::Zero(e.value.rows(), e.value.cols()));
  }
}

template <typename T>
void Adam<T>::step(ParamStore<T>& params, const GradStore<T>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("adam: parameter/gradient stores not aligned");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite()) {
      throw NumericalError("adam: non-finite gradient for parameter '" + params[i].name +
                           "' at step " + std::to_string(t_ + 1));
    }
  }
  ++t_;
  const double b1 = hyper_.beta1, b2 = hyper_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const T lr = static_cast<T>(hyper_.lr);
  const T eps = static_cast<T>(hyper_.eps);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto g = grads[i].array();
    m_[i].array() = static_cast<T>(b1) * m_[i].array() + static_cast<T>(1.0 - b1) * g;
    v_[i].array() = static_cast<T>(b2) * v_[i].array() + static_cast<T>(1.0 - b2) * g.square();
    params[i].value.array() -=
        lr * (m_[i].array() / static_cast<T>(c1)) /
        ((v_[i].array() / static_cast<T>(c2)).sqrt() + eps);
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace trajfm::nn
