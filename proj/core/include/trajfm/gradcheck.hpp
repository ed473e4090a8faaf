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
#include <functional>
#include <string>
#include <vector>

#include "trajfm/tensor.hpp"

namespace trajfm::nn {

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-4;
  // Below this |analytic| + |numeric| the absolute difference is compared.
  double absolute_floor = 1e-8;
  std::size_t samples = 200;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string param;
  std::size_t flat_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;  // relative, or absolute below the floor
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_error = 0.0;
  std::string worst_param;
  bool passed = false;
  std::size_t tensors_covered = 0;
};

using LossFn = std::function<double(const ParamStore<double>&)>;
using GradFn = std::function<double(const ParamStore<double>&, GradStore<double>&)>;

// Central differences (f(p + h) - f(p - h)) / 2h on sampled coordinates.
// Every tensor receives at least one sample when samples >= tensor count;
// the rest are drawn uniformly over all scalars. params is restored on
// return. Relative error is |a - n| / (|a| + |n|).
GradCheckReport finite_difference_check(const LossFn& loss, const GradFn& grad,
                                        ParamStore<double>& params,
                                        const GradCheckOptions& options);

}  // namespace trajfm::nn
