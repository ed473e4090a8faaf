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

#include "trajfm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <string>
#include <vector>

#include "trajfm/embedding.hpp"
#include "trajfm/error.hpp"

namespace trajfm::pretrain {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'T', 'F', 'M', '1'};

std::string shape_str(const nn::Mat<float>& m) {
  return "[" + std::to_string(m.rows()) + ", " + std::to_string(m.cols()) + "]";
}

}  // namespace

nn::ParamStore<float> reference_params(const model::ModelConfig& cfg) {
  const embedding::SyntheticPoiProvider provider(0, static_cast<std::size_t>(cfg.poi_dim));
  return model::Model<float>(cfg, provider).init_params(0);
}

void check_shapes(const nn::ParamStore<float>& actual, const nn::ParamStore<float>& expected) {
  for (const auto& e : expected) {
    if (!actual.contains(e.name)) throw DataError("checkpoint: missing tensor '" + e.name + "'");
    const auto& a = actual.at(e.name);
    if (a.rows() != e.value.rows() || a.cols() != e.value.cols()) {
      throw DataError("checkpoint: tensor '" + e.name + "' has shape " + shape_str(a) +
                      ", configuration expects " + shape_str(e.value));
    }
  }
  for (const auto& a : actual) {
    if (!expected.contains(a.name)) {
      throw DataError("checkpoint: unexpected tensor '" + a.name + "'");
    }
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["config"] = ckpt.config.entries();
  header["seed"] = ckpt.seed;
  header["step"] = ckpt.step;
  nlohmann::json params = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : ckpt.params) {
    params.push_back({{"name", e.name},
                      {"shape", {e.value.rows(), e.value.cols()}},
                      {"byte_offset", offset}});
    offset += static_cast<std::uint64_t>(e.value.size()) * sizeof(float);
  }
  header["params"] = std::move(params);
  const std::string text = header.dump();
  const auto len = static_cast<std::uint32_t>(text.size());

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, 4);
    out.put(static_cast<char>(kCheckpointVersion));
    char lenb[4];
    std::memcpy(lenb, &len, 4);
    out.write(lenb, 4);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& e : ckpt.params) {
      out.write(reinterpret_cast<const char*>(e.value.data()),
                static_cast<std::streamsize>(e.value.size() * sizeof(float)));
    }
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  const std::string where = "checkpoint " + path.string() + ": ";
  if (bytes.size() < 9 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError(where + "bad magic (not a TFM1 file)");
  }
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kCheckpointVersion) {
    throw DataError(where + "unsupported version " + std::to_string(version));
  }
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + 5, 4);
  if (bytes.size() < 9 + static_cast<std::size_t>(len)) throw DataError(where + "truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 9, bytes.begin() + 9 + len);
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(where + "malformed header: " + ex.what());
  }
  Checkpoint ck;
  const std::size_t payload = 9 + static_cast<std::size_t>(len);
  try {
    for (const auto& [k, v] : header.at("config").items()) ck.config.set(k, v.get<std::string>());
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.step = header.at("step").get<std::uint64_t>();
    for (const auto& p : header.at("params")) {
      const auto name = p.at("name").get<std::string>();
      const auto rows = p.at("shape").at(0).get<Eigen::Index>();
      const auto cols = p.at("shape").at(1).get<Eigen::Index>();
      const auto off = p.at("byte_offset").get<std::uint64_t>();
      if (rows < 0 || cols < 0) throw DataError(where + "negative shape for '" + name + "'");
      const std::size_t nbytes = static_cast<std::size_t>(rows * cols) * sizeof(float);
      if (payload + off + nbytes > bytes.size()) {
        throw DataError(where + "truncated payload at tensor '" + name + "'");
      }
      nn::Mat<float> m(rows, cols);
      std::memcpy(m.data(), bytes.data() + payload + off, nbytes);
      ck.params.add(name, std::move(m));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(where + "malformed header: " + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw DataError(where + ex.what());
  }
  check_shapes(ck.params, reference_params(model::ModelConfig::from_config(ck.config)));
  return ck;
}

}  // namespace trajfm::pretrain
