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
#include <vector>

#include "trajfm/tensor.hpp"

namespace trajfm::nn {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction and no weight decay.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const ParamStore<T>& params, AdamHyper hyper = {});

  // Throws NumericalError naming the first non-finite gradient; parameters
  // and moments are left untouched in that case.
  void step(ParamStore<T>& params, const GradStore<T>& grads);

  std::int64_t step_count() const noexcept { return t_; }
  const AdamHyper& hyper() const noexcept { return hyper_; }
  const std::vector<Mat<T>>& first_moment() const noexcept { return m_; }
  const std::vector<Mat<T>>& second_moment() const noexcept { return v_; }

 private:
  AdamHyper hyper_;
  std::vector<Mat<T>> m_;
  std::vector<Mat<T>> v_;
  std::int64_t t_ = 0;
};

}  // namespace trajfm::nn
