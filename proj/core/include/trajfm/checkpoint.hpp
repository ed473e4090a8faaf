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

#include "trajfm/kv_config.hpp"
#include "trajfm/strformer.hpp"
#include "trajfm/tensor.hpp"

namespace trajfm::pretrain {

inline constexpr std::uint8_t kCheckpointVersion = 0x01;

struct Checkpoint {
  KvConfig config;  // resolved run configuration (model keys included)
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  nn::ParamStore<float> params;
};

// Layout: "TFM1", version byte, u32 LE header length, JSON header
// {config, seed, step, params: [{name, shape, byte_offset}]}, then the
// little-endian f32 payload in header order. Written via a temporary file
// and rename.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Throws DataError on a bad magic, unsupported version, truncation, or
// parameter shapes that disagree with the stored model configuration.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Parameter names and shapes a freshly initialized model would have.
nn::ParamStore<float> reference_params(const model::ModelConfig& cfg);

// Throws DataError naming the first missing, extra, or mis-shaped tensor.
void check_shapes(const nn::ParamStore<float>& actual, const nn::ParamStore<float>& expected);

}  // namespace trajfm::pretrain
