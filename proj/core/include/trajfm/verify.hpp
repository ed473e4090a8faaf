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
#include <memory>

#include "trajfm/embedding.hpp"
#include "trajfm/gradcheck.hpp"
#include "trajfm/pretrain.hpp"
#include "trajfm/strformer.hpp"

namespace trajfm::pretrain {

// Sequence used by the full-loss gradient check: the first five resampled
// points of a seeded synthetic trajectory with MaskPlan (2, 4), so the loss
// covers modality-masked context points and a teacher-forced generation
// segment ending in an end flag.
// Move-only; points and sequence refer into `index`.
struct GradCheckFixture {
  data::Dataset dataset;
  std::unique_ptr<const data::PoiIndex> index;
  std::vector<AnnotatedPoint> points;
  TrainingSequence sequence;
};
GradCheckFixture gradcheck_fixture(std::uint64_t seed);

// Finite-difference check of the full pre-training loss in double precision.
nn::GradCheckReport full_loss_gradcheck(const model::ModelConfig& cfg,
                                        const embedding::PoiVectorProvider& provider,
                                        std::uint64_t seed,
                                        const nn::GradCheckOptions& options);

}  // namespace trajfm::pretrain
