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

#include "trajfm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "trajfm/error.hpp"

namespace trajfm::nn {

template <typename T>
Graph<T>::Graph(const ParamStore<T>* params, bool record)
    : params_(params), record_(record) {
  nodes_.reserve(256);
  if (params_ != nullptr) param_nodes_.assign(params_->size(), -1);
}

template <typename T>
Var Graph<T>::push(Mat<T> value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_ && requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

template <typename T>
void Graph<T>::check(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::invalid_argument("invalid graph variable");
  }
}

template <typename T>
const Mat<T>& Graph<T>::value(Var v) const {
  check(v);
  const Node& n = nodes_[static_cast<std::size_t>(v.id)];
  return n.ext != nullptr ? *n.ext : n.value;
}

template <typename T>
Mat<T>& Graph<T>::grad(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.size() == 0) {
    const Mat<T>& val = n.ext != nullptr ? *n.ext : n.value;
    n.grad = Mat<T>::Zero(val.rows(), val.cols());
  }
  return n.grad;
}

template <typename T>
Var Graph<T>::constant(Mat<T> value) {
  return push(std::move(value), false);
}

template <typename T>
Var Graph<T>::param(const std::string& name) {
  if (params_ == nullptr) throw std::logic_error("graph has no parameter store");
  return param(params_->index_of(name));
}

template <typename T>
Var Graph<T>::param(std::size_t index) {
  if (params_ == nullptr || index >= params_->size()) {
    throw std::out_of_range("parameter index out of range");
  }
  if (param_nodes_[index] >= 0) return Var{param_nodes_[index]};
  Node n;
  n.ext = &(*params_)[index].value;
  n.requires_grad = record_;
  n.param_index = static_cast<std::int32_t>(index);
  nodes_.push_back(std::move(n));
  const auto id = static_cast<std::int32_t>(nodes_.size() - 1);
  param_nodes_[index] = id;
  return Var{id};
}

namespace {

template <typename T>
void require_same_shape(const Mat<T>& a, const Mat<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

}  // namespace

template <typename T>
Var Graph<T>::matmul(Var a, Var b) {
  const Mat<T>& A = value(a);
  const Mat<T>& B = value(b);
  if (A.cols() != B.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Mat<T> out = A * B;
  Var o = push(std::move(out), needs(a) || needs(b));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, b, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      if (needs(a)) grad(a).noalias() += g * value(b).transpose();
      if (needs(b)) grad(b).noalias() += value(a).transpose() * g;
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::matmul_nt(Var a, Var b) {
  const Mat<T>& A = value(a);
  const Mat<T>& B = value(b);
  if (A.cols() != B.cols()) throw std::invalid_argument("matmul_nt: inner dimensions differ");
  Mat<T> out = A * B.transpose();
  Var o = push(std::move(out), needs(a) || needs(b));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, b, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      if (needs(a)) grad(a).noalias() += g * value(b);
      if (needs(b)) grad(b).noalias() += g.transpose() * value(a);
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::linear(Var x, Var w, Var bias) {
  const Mat<T>& X = value(x);
  const Mat<T>& W = value(w);
  if (X.cols() != W.cols()) throw std::invalid_argument("linear: input width mismatch");
  Mat<T> out = X * W.transpose();
  if (bias.valid()) {
    const Mat<T>& B = value(bias);
    if (B.rows() != 1 || B.cols() != W.rows()) {
      throw std::invalid_argument("linear: bias shape mismatch");
    }
    out.rowwise() += B.row(0);
  }
  const bool rg = needs(x) || needs(w) || (bias.valid() && needs(bias));
  Var o = push(std::move(out), rg);
  if (needs(o)) {
    nodes_[o.id].back = [this, x, w, bias, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      if (needs(x)) grad(x).noalias() += g * value(w);
      if (needs(w)) grad(w).noalias() += g.transpose() * value(x);
      if (bias.valid() && needs(bias)) grad(bias) += g.colwise().sum();
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Mat<T> out = value(a) + value(b);
  Var o = push(std::move(out), needs(a) || needs(b));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, b, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      if (needs(a)) grad(a) += g;
      if (needs(b)) grad(b) += g;
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Mat<T> out = value(a) - value(b);
  Var o = push(std::move(out), needs(a) || needs(b));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, b, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      if (needs(a)) grad(a) += g;
      if (needs(b)) grad(b) -= g;
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::add_row(Var a, Var row) {
  const Mat<T>& R = value(row);
  if (R.rows() != 1 || R.cols() != value(a).cols()) {
    throw std::invalid_argument("add_row: row shape mismatch");
  }
  Mat<T> out = value(a);
  out.rowwise() += R.row(0);
  Var o = push(std::move(out), needs(a) || needs(row));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, row, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      if (needs(a)) grad(a) += g;
      if (needs(row)) grad(row) += g.colwise().sum();
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  Mat<T> out = value(a).cwiseProduct(value(b));
  Var o = push(std::move(out), needs(a) || needs(b));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, b, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      if (needs(a)) grad(a) += g.cwiseProduct(value(b));
      if (needs(b)) grad(b) += g.cwiseProduct(value(a));
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::scale(Var a, T s) {
  Mat<T> out = value(a) * s;
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, s, o] { grad(a) += nodes_[o.id].grad * s; };
  }
  return o;
}

template <typename T>
Var Graph<T>::relu(Var a) {
  Mat<T> out = value(a).cwiseMax(T(0));
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      grad(a) += (value(a).array() > T(0)).select(g, T(0)).matrix();
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::softplus(Var a) {
  const Mat<T>& A = value(a);
  Mat<T> out = A.unaryExpr([](T x) {
    return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
  });
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, o] {
      const Mat<T> sig = value(a).unaryExpr([](T x) {
        return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
      });
      grad(a) += nodes_[o.id].grad.cwiseProduct(sig);
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::sigmoid(Var a) {
  Mat<T> out = value(a).unaryExpr([](T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
  });
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, o] {
      const Mat<T>& y = nodes_[o.id].value;
      grad(a) += nodes_[o.id].grad.cwiseProduct(
          y.unaryExpr([](T v) { return v * (T(1) - v); }));
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::cos(Var a) {
  Mat<T> out = value(a).array().cos().matrix();
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, o] {
      grad(a) -= nodes_[o.id].grad.cwiseProduct(value(a).array().sin().matrix());
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::sin(Var a) {
  Mat<T> out = value(a).array().sin().matrix();
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, o] {
      grad(a) += nodes_[o.id].grad.cwiseProduct(value(a).array().cos().matrix());
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::square(Var a) {
  Mat<T> out = value(a).array().square().matrix();
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, o] {
      grad(a) += T(2) * nodes_[o.id].grad.cwiseProduct(value(a));
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::sqrt_eps(Var a, T eps) {
  Mat<T> out = (value(a).array() + eps).sqrt().matrix();
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, o] {
      const Mat<T>& y = nodes_[o.id].value;
      grad(a) += (nodes_[o.id].grad.array() / (T(2) * y.array())).matrix();
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index r = value(parts[0]).rows();
  Eigen::Index c = 0;
  bool rg = false;
  for (Var p : parts) {
    if (value(p).rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
    c += value(p).cols();
    rg = rg || needs(p);
  }
  Mat<T> out(r, c);
  Eigen::Index off = 0;
  for (Var p : parts) {
    out.middleCols(off, value(p).cols()) = value(p);
    off += value(p).cols();
  }
  Var o = push(std::move(out), rg);
  if (needs(o)) {
    std::vector<Var> ps(parts.begin(), parts.end());
    nodes_[o.id].back = [this, ps, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      Eigen::Index off2 = 0;
      for (Var p : ps) {
        const Eigen::Index w = value(p).cols();
        if (needs(p)) grad(p) += g.middleCols(off2, w);
        off2 += w;
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const Eigen::Index c = value(parts[0]).cols();
  Eigen::Index r = 0;
  bool rg = false;
  for (Var p : parts) {
    if (value(p).cols() != c) throw std::invalid_argument("concat_rows: column mismatch");
    r += value(p).rows();
    rg = rg || needs(p);
  }
  Mat<T> out(r, c);
  Eigen::Index off = 0;
  for (Var p : parts) {
    out.middleRows(off, value(p).rows()) = value(p);
    off += value(p).rows();
  }
  Var o = push(std::move(out), rg);
  if (needs(o)) {
    std::vector<Var> ps(parts.begin(), parts.end());
    nodes_[o.id].back = [this, ps, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      Eigen::Index off2 = 0;
      for (Var p : ps) {
        const Eigen::Index h = value(p).rows();
        if (needs(p)) grad(p) += g.middleRows(off2, h);
        off2 += h;
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::gather_rows(std::span<const RowRef> rows) {
  if (rows.empty()) throw std::invalid_argument("gather_rows: no rows");
  const Eigen::Index c = value(rows[0].src).cols();
  bool rg = false;
  Mat<T> out(static_cast<Eigen::Index>(rows.size()), c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Mat<T>& s = value(rows[i].src);
    if (s.cols() != c || rows[i].row < 0 || rows[i].row >= s.rows()) {
      throw std::invalid_argument("gather_rows: bad row reference");
    }
    out.row(static_cast<Eigen::Index>(i)) = s.row(rows[i].row);
    rg = rg || needs(rows[i].src);
  }
  Var o = push(std::move(out), rg);
  if (needs(o)) {
    std::vector<RowRef> rs(rows.begin(), rows.end());
    nodes_[o.id].back = [this, rs, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      for (std::size_t i = 0; i < rs.size(); ++i) {
        if (needs(rs[i].src)) grad(rs[i].src).row(rs[i].row) += g.row(static_cast<Eigen::Index>(i));
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::group_mean_rows(Var a, Eigen::Index group) {
  const Mat<T>& A = value(a);
  if (group <= 0 || A.rows() % group != 0) {
    throw std::invalid_argument("group_mean_rows: rows not divisible by group");
  }
  const Eigen::Index n = A.rows() / group;
  Mat<T> out = Mat<T>::Zero(n, A.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(i) = A.middleRows(i * group, group).colwise().sum() / static_cast<T>(group);
  }
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, group, n, o] {
      const Mat<T>& g = nodes_[o.id].grad;
      Mat<T>& ga = grad(a);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < group; ++k) {
          ga.row(i * group + k) += g.row(i) / static_cast<T>(group);
        }
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::mean_rows(Var a) {
  const Mat<T>& A = value(a);
  Mat<T> out = A.colwise().sum() / static_cast<T>(A.rows());
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, o] {
      Mat<T>& ga = grad(a);
      const T inv = T(1) / static_cast<T>(ga.rows());
      ga.rowwise() += nodes_[o.id].grad.row(0) * inv;
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::row_sum(Var a) {
  Mat<T> out = value(a).rowwise().sum();
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, o] {
      grad(a).colwise() += nodes_[o.id].grad.col(0);
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::sum_all(Var a) {
  Mat<T> out(1, 1);
  out(0, 0) = value(a).sum();
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, o] {
      grad(a).array() += nodes_[o.id].grad(0, 0);
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::softmax_rows(Var a, const BoolMat* allow) {
  const Mat<T>& A = value(a);
  if (allow != nullptr && (allow->rows() != A.rows() || allow->cols() != A.cols())) {
    throw std::invalid_argument("softmax_rows: mask shape mismatch");
  }
  Mat<T> out = Mat<T>::Zero(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (allow == nullptr || (*allow)(i, j)) mx = std::max(mx, A(i, j));
    }
    if (!std::isfinite(mx)) {
      throw NumericalError("attention row " + std::to_string(i) +
                           " has no allowed (finite) entries");
    }
    T sum = 0;
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (allow == nullptr || (*allow)(i, j)) {
        out(i, j) = std::exp(A(i, j) - mx);
        sum += out(i, j);
      }
    }
    out.row(i) /= sum;
  }
  Var o = push(std::move(out), needs(a));
  if (needs(o)) {
    nodes_[o.id].back = [this, a, o] {
      const Mat<T>& y = nodes_[o.id].value;
      const Mat<T>& g = nodes_[o.id].grad;
      Mat<T> dot = y.cwiseProduct(g).rowwise().sum();
      Mat<T> d = g;
      d.colwise() -= dot.col(0);
      grad(a) += y.cwiseProduct(d);
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::layer_norm(Var x, Var gain, Var bias, T eps) {
  const Mat<T>& X = value(x);
  const Eigen::Index n = X.cols();
  if (value(gain).cols() != n || value(bias).cols() != n) {
    throw std::invalid_argument("layer_norm: gain/bias width mismatch");
  }
  Mat<T> xhat(X.rows(), n);
  Mat<T> inv(X.rows(), 1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const T mu = X.row(i).mean();
    const T var = (X.row(i).array() - mu).square().mean();
    inv(i, 0) = T(1) / std::sqrt(var + eps);
    xhat.row(i) = (X.row(i).array() - mu) * inv(i, 0);
  }
  Mat<T> out = xhat;
  out.array().rowwise() *= value(gain).row(0).array();
  out.rowwise() += value(bias).row(0);
  Var o = push(std::move(out), needs(x) || needs(gain) || needs(bias));
  if (needs(o)) {
    nodes_[o.id].back = [this, x, gain, bias, o, xhat = std::move(xhat),
                         inv = std::move(inv)] {
      const Mat<T>& g = nodes_[o.id].grad;
      if (needs(gain)) grad(gain) += g.cwiseProduct(xhat).colwise().sum();
      if (needs(bias)) grad(bias) += g.colwise().sum();
      if (needs(x)) {
        Mat<T> dxhat = g;
        dxhat.array().rowwise() *= value(gain).row(0).array();
        const T w = static_cast<T>(dxhat.cols());
        Mat<T>& gx = grad(x);
        for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
          const T s1 = dxhat.row(i).sum();
          const T s2 = dxhat.row(i).dot(xhat.row(i));
          gx.row(i).array() += inv(i, 0) / w *
                               (w * dxhat.row(i).array() - s1 - xhat.row(i).array() * s2);
        }
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::rotary(Var x, Var phi, std::span<const T> theta) {
  const Mat<T>& X = value(x);
  const Mat<T>& P = value(phi);
  const Eigen::Index half = X.cols() / 2;
  if (X.cols() % 2 != 0 || P.rows() != X.rows() || P.cols() != half ||
      static_cast<Eigen::Index>(theta.size()) != half) {
    throw std::invalid_argument("rotary: shape mismatch");
  }
  Mat<T> out(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index k = 0; k < half; ++k) {
      const T ang = P(i, k) * theta[static_cast<std::size_t>(k)];
      const T c = std::cos(ang), s = std::sin(ang);
      const T a = X(i, 2 * k), b = X(i, 2 * k + 1);
      out(i, 2 * k) = a * c - b * s;
      out(i, 2 * k + 1) = a * s + b * c;
    }
  }
  Var o = push(std::move(out), needs(x) || needs(phi));
  if (needs(o)) {
    std::vector<T> th(theta.begin(), theta.end());
    nodes_[o.id].back = [this, x, phi, o, th = std::move(th)] {
      const Mat<T>& g = nodes_[o.id].grad;
      const Mat<T>& Y = nodes_[o.id].value;
      const Mat<T>& P2 = value(phi);
      const Eigen::Index h = P2.cols();
      const bool gx = needs(x), gp = needs(phi);
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index k = 0; k < h; ++k) {
          const T ang = P2(i, k) * th[static_cast<std::size_t>(k)];
          const T c = std::cos(ang), s = std::sin(ang);
          const T g0 = g(i, 2 * k), g1 = g(i, 2 * k + 1);
          if (gx) {
            Mat<T>& dx = grad(x);
            dx(i, 2 * k) += g0 * c + g1 * s;
            dx(i, 2 * k + 1) += -g0 * s + g1 * c;
          }
          if (gp) {
            const T dang = -g0 * Y(i, 2 * k + 1) + g1 * Y(i, 2 * k);
            grad(phi)(i, k) += dang * th[static_cast<std::size_t>(k)];
          }
        }
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::fourier(Var features, Var freqs) {
  const Mat<T>& F = value(features);
  const Mat<T>& B = value(freqs);
  if (F.cols() != B.rows()) throw std::invalid_argument("fourier: feature count mismatch");
  const Eigen::Index nf = B.rows(), K = B.cols();
  const T two_pi = static_cast<T>(2.0 * std::numbers::pi);
  Mat<T> out(F.rows(), nf * 2 * K);
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    for (Eigen::Index c = 0; c < nf; ++c) {
      for (Eigen::Index k = 0; k < K; ++k) {
        const T ang = two_pi * F(i, c) * B(c, k);
        out(i, c * 2 * K + k) = std::cos(ang);
        out(i, c * 2 * K + K + k) = std::sin(ang);
      }
    }
  }
  if (needs(features)) throw std::invalid_argument("fourier: features must be constant");
  Var o = push(std::move(out), needs(freqs));
  if (needs(o)) {
    nodes_[o.id].back = [this, features, freqs, o, two_pi] {
      const Mat<T>& g = nodes_[o.id].grad;
      const Mat<T>& Y = nodes_[o.id].value;
      const Mat<T>& F2 = value(features);
      Mat<T>& gb = grad(freqs);
      const Eigen::Index nf2 = gb.rows(), K2 = gb.cols();
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index c = 0; c < nf2; ++c) {
          const T scale = two_pi * F2(i, c);
          for (Eigen::Index k = 0; k < K2; ++k) {
            const Eigen::Index jc = c * 2 * K2 + k, js = jc + K2;
            // d cos = -sin * dang, d sin = cos * dang
            gb(c, k) += scale * (-Y(i, js) * g(i, jc) + Y(i, jc) * g(i, js));
          }
        }
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::grouped_attention(Var q, Var k, Var v, Eigen::Index group, int heads) {
  const Mat<T>& Q = value(q);
  const Mat<T>& K = value(k);
  const Mat<T>& V = value(v);
  require_same_shape(Q, K, "grouped_attention");
  require_same_shape(Q, V, "grouped_attention");
  const Eigen::Index d = Q.cols();
  if (heads <= 0 || d % heads != 0 || group <= 0 || Q.rows() % group != 0) {
    throw std::invalid_argument("grouped_attention: bad group/head configuration");
  }
  const Eigen::Index dh = d / heads;
  const Eigen::Index ng = Q.rows() / group;
  const T sc = T(1) / std::sqrt(static_cast<T>(dh));
  // probs: for each (group, head) a group x group block, stacked.
  Mat<T> probs(ng * heads * group, group);
  Mat<T> out(Q.rows(), d);
  for (Eigen::Index gi = 0; gi < ng; ++gi) {
    for (int h = 0; h < heads; ++h) {
      auto Qh = Q.block(gi * group, h * dh, group, dh);
      auto Kh = K.block(gi * group, h * dh, group, dh);
      auto Vh = V.block(gi * group, h * dh, group, dh);
      Mat<T> s = (Qh * Kh.transpose()) * sc;
      for (Eigen::Index r = 0; r < group; ++r) {
        const T mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp().matrix();
        s.row(r) /= s.row(r).sum();
      }
      probs.middleRows((gi * heads + h) * group, group) = s;
      out.block(gi * group, h * dh, group, dh).noalias() = s * Vh;
    }
  }
  Var o = push(std::move(out), needs(q) || needs(k) || needs(v));
  if (needs(o)) {
    nodes_[o.id].back = [this, q, k, v, o, group, heads, dh, ng, sc,
                         probs = std::move(probs)] {
      const Mat<T>& g = nodes_[o.id].grad;
      const Mat<T>& Q2 = value(q);
      const Mat<T>& K2 = value(k);
      const Mat<T>& V2 = value(v);
      for (Eigen::Index gi = 0; gi < ng; ++gi) {
        for (int h = 0; h < heads; ++h) {
          const auto P = probs.middleRows((gi * heads + h) * group, group);
          const auto G = g.block(gi * group, h * dh, group, dh);
          if (needs(v)) grad(v).block(gi * group, h * dh, group, dh).noalias() += P.transpose() * G;
          Mat<T> dp = G * V2.block(gi * group, h * dh, group, dh).transpose();
          Mat<T> dot = P.cwiseProduct(dp).rowwise().sum();
          dp.colwise() -= dot.col(0);
          Mat<T> ds = P.cwiseProduct(dp) * sc;
          if (needs(q)) {
            grad(q).block(gi * group, h * dh, group, dh).noalias() +=
                ds * K2.block(gi * group, h * dh, group, dh);
          }
          if (needs(k)) {
            grad(k).block(gi * group, h * dh, group, dh).noalias() +=
                ds.transpose() * Q2.block(gi * group, h * dh, group, dh);
          }
        }
      }
    };
  }
  return o;
}

template <typename T>
Var Graph<T>::bce(Var prob, Mat<T> target, T lo, T hi) {
  const Mat<T>& P = value(prob);
  require_same_shape(P, target, "bce");
  Mat<T> out(P.rows(), P.cols());
  for (Eigen::Index i = 0; i < P.size(); ++i) {
    const T p = std::clamp(P.data()[i], lo, hi);
    const T r = target.data()[i];
    out.data()[i] = -(r * std::log(p) + (T(1) - r) * std::log(T(1) - p));
  }
  Var o = push(std::move(out), needs(prob));
  if (needs(o)) {
    nodes_[o.id].back = [this, prob, o, lo, hi, target = std::move(target)] {
      const Mat<T>& g = nodes_[o.id].grad;
      const Mat<T>& P2 = value(prob);
      Mat<T>& gp = grad(prob);
      for (Eigen::Index i = 0; i < P2.size(); ++i) {
        const T p = P2.data()[i];
        if (p <= lo || p >= hi) continue;
        const T r = target.data()[i];
        gp.data()[i] += g.data()[i] * (-r / p + (T(1) - r) / (T(1) - p));
      }
    };
  }
  return o;
}

template <typename T>
void Graph<T>::backward(Var loss, GradStore<T>& grads) {
  check(loss);
  if (!record_) throw std::logic_error("backward on a forward-only graph");
  const Mat<T>& L = value(loss);
  if (L.rows() != 1 || L.cols() != 1) throw std::invalid_argument("backward: loss is not scalar");
  if (params_ != nullptr && grads.size() != params_->size()) {
    throw std::invalid_argument("backward: gradient store not aligned with parameters");
  }
  if (!needs(loss)) return;
  grad(loss)(0, 0) += T(1);
  for (std::int32_t id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.back) n.back();
  }
  for (std::size_t i = 0; i < param_nodes_.size(); ++i) {
    const std::int32_t id = param_nodes_[i];
    if (id < 0 || id > loss.id) continue;
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() != 0) grads[i] += n.grad;
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace trajfm::nn
