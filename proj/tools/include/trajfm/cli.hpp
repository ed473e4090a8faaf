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

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "trajfm/embedding.hpp"
#include "trajfm/kv_config.hpp"

namespace trajfm::cli {

// Settings for one run: the --config file, then `--set key=value` pairs,
// then dedicated flags (--seed, --epochs, ...), later sources winning.
struct RunConfig {
  KvConfig values;

  static RunConfig resolve(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::string>& assignments);
  std::uint64_t seed() const { return values.get_uint("seed", 0); }
  std::string render() const;  // "# resolved configuration" block
};

// Keys: poi_provider = synthetic | file, poi_seed, poi_dim, poi_table.
std::unique_ptr<embedding::PoiVectorProvider> make_provider(const KvConfig& cfg);

// Runs one command line (argv[0] is the program name) and returns the exit
// code: 0 success, 1 usage error, 2 data error, 3 numerical failure.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace trajfm::cli
