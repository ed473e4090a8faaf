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
#include <span>
#include <string>
#include <vector>

#include "trajfm/tensor.hpp"

namespace trajfm::nn {

using BoolMat = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Handle to a node of a Graph.
struct Var {
  std::int32_t id = -1;
  bool valid() const noexcept { return id >= 0; }
};

// Reverse-mode tape. Every op evaluates eagerly and, when recording, pushes
// an adjoint closure. Parameters are bound by reference to a ParamStore and
// their gradients land in a GradStore aligned with it.
//
// Shapes: all values are 2-D row-major matrices; a vector is a 1 x n row.
template <typename T>
class Graph {
 public:
  struct RowRef {
    Var src;
    Eigen::Index row;
  };

  // record = false builds a forward-only graph (no adjoints kept).
  explicit Graph(const ParamStore<T>* params = nullptr, bool record = true);

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Mat<T> value);
  // Binds a parameter; repeated calls with the same name return the same node.
  Var param(const std::string& name);
  Var param(std::size_t index);

  const Mat<T>& value(Var v) const;
  Eigen::Index rows(Var v) const { return value(v).rows(); }
  Eigen::Index cols(Var v) const { return value(v).cols(); }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return record_; }

  Var matmul(Var a, Var b);     // a * b
  Var matmul_nt(Var a, Var b);  // a * b^T
  // x * w^T + bias; w is (out x in), bias a 1 x out row or invalid for none.
  Var linear(Var x, Var w, Var bias = {});
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcast a 1 x C row over every row of a
  Var mul(Var a, Var b);        // elementwise
  Var scale(Var a, T s);

  Var relu(Var a);
  Var softplus(Var a);  // max(x, 0) + log1p(exp(-|x|))
  Var sigmoid(Var a);
  Var cos(Var a);
  Var sin(Var a);
  Var square(Var a);
  Var sqrt_eps(Var a, T eps);  // sqrt(a + eps)

  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var gather_rows(std::span<const RowRef> rows);
  Var group_mean_rows(Var a, Eigen::Index group);  // mean over consecutive row groups
  Var mean_rows(Var a);                            // 1 x C
  Var row_sum(Var a);                              // R x 1
  Var sum_all(Var a);                              // 1 x 1

  // Row softmax. With a mask, denied entries get probability exactly 0; a
  // row with no allowed entry throws NumericalError.
  Var softmax_rows(Var a, const BoolMat* allow = nullptr);
  Var layer_norm(Var x, Var gain, Var bias, T eps);

  // Rotates consecutive column pairs (2k, 2k+1) of x by angle phi(i,k)*theta[k].
  Var rotary(Var x, Var phi, std::span<const T> theta);
  // Learnable Fourier features: for constant features (N x F) and frequencies
  // (F x K) returns N x (F * 2K), feature c occupying [cos(2 pi f b), sin(2 pi f b)].
  Var fourier(Var features, Var freqs);
  // Multi-head scaled dot-product attention inside consecutive groups of
  // `group` rows (no cross-group attention). q, k, v: (G*group x d).
  Var grouped_attention(Var q, Var k, Var v, Eigen::Index group, int heads);
  // Elementwise binary cross-entropy with probabilities clamped to [lo, hi];
  // the clamp has zero derivative outside the interval.
  Var bce(Var prob, Mat<T> target, T lo, T hi);

  // Accumulates d(loss)/d(param) into grads (loss must be 1 x 1).
  void backward(Var loss, GradStore<T>& grads);

 private:
  struct Node {
    Mat<T> value;
    const Mat<T>* ext = nullptr;  // parameter storage, if bound
    Mat<T> grad;
    bool requires_grad = false;
    std::int32_t param_index = -1;
    std::function<void()> back;
  };

  Var push(Mat<T> value, bool requires_grad);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  Mat<T>& grad(Var v);
  void check(Var v) const;

  const ParamStore<T>* params_;
  bool record_;
  std::vector<Node> nodes_;
  std::vector<std::int32_t> param_nodes_;
};

}  // namespace trajfm::nn
