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

#include "trajfm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace trajfm::nn {

GradCheckReport finite_difference_check(const LossFn& loss, const GradFn& grad,
                                        ParamStore<double>& params,
                                        const GradCheckOptions& options) {
  GradStore<double> analytic(params);
  grad(params, analytic);

  std::mt19937_64 rng(options.seed);
  std::vector<std::pair<std::size_t, std::size_t>> picks;  // (tensor, flat)
  std::set<std::pair<std::size_t, std::size_t>> seen;
  auto pick_in = [&](std::size_t t) {
    const auto n = static_cast<std::size_t>(params[t].value.size());
    if (n == 0) return;
    for (int attempt = 0; attempt < 16; ++attempt) {
      const std::size_t f = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      if (seen.insert({t, f}).second) {
        picks.emplace_back(t, f);
        return;
      }
    }
  };
  if (options.samples >= params.size()) {
    for (std::size_t t = 0; t < params.size(); ++t) pick_in(t);
  }
  const std::size_t total = params.scalar_count();
  std::vector<std::size_t> offsets;
  std::size_t acc = 0;
  for (const auto& e : params) {
    offsets.push_back(acc);
    acc += static_cast<std::size_t>(e.value.size());
  }
  while (picks.size() < std::min(options.samples, total)) {
    const std::size_t g = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), g);
    const auto t = static_cast<std::size_t>(it - offsets.begin()) - 1;
    const std::size_t f = g - offsets[t];
    if (seen.insert({t, f}).second) picks.emplace_back(t, f);
  }

  GradCheckReport report;
  std::set<std::size_t> covered;
  for (const auto& [t, f] : picks) {
    double& x = params[t].value.data()[f];
    const double orig = x;
    x = orig + options.h;
    const double fp = loss(params);
    x = orig - options.h;
    const double fm = loss(params);
    x = orig;
    GradCheckEntry e;
    e.param = params[t].name;
    e.flat_index = f;
    e.analytic = analytic[t].data()[f];
    e.numeric = (fp - fm) / (2.0 * options.h);
    const double denom = std::abs(e.analytic) + std::abs(e.numeric);
    const double diff = std::abs(e.analytic - e.numeric);
    e.error = denom < options.absolute_floor ? diff : diff / denom;
    if (e.error > report.max_error || report.entries.empty()) {
      report.max_error = std::max(report.max_error, e.error);
      if (e.error >= report.max_error) report.worst_param = e.param;
    }
    covered.insert(t);
    report.entries.push_back(std::move(e));
  }
  report.tensors_covered = covered.size();
  report.passed = report.max_error < options.tolerance;
  return report;
}

}  // namespace trajfm::nn
