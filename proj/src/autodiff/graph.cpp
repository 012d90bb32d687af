// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#include "wmattr/autodiff/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "wmattr/error.hpp"

namespace wmattr::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

ConstMatMap as_matrix(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}
MatMap as_matrix(Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

enum class Broadcast { kNone, kRows };

Broadcast broadcast_kind(OpTag tag, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (a.rank() == 2 && b.size() == a.cols() && (b.rank() == 1 || b.rows() == 1)) {
    return Broadcast::kRows;
  }
  throw ShapeError(std::string(op_name(tag)) + ": incompatible shapes " +
                   shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
}

// Largest double below 1; keeps saturated sigmoid/tanh outputs strictly inside
// their open ranges.
constexpr double kBelowOne = 1.0 - 0x1.0p-53;

inline double sigmoid_scalar(double x) {
  // Split by sign so exp() never overflows.
  double y;
  if (x >= 0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  return std::clamp(y, std::numeric_limits<double>::denorm_min(), kBelowOne);
}

}  // namespace

std::string_view op_name(OpTag tag) noexcept {
  switch (tag) {
    case OpTag::kConstant: return "constant";
    case OpTag::kParameter: return "parameter";
    case OpTag::kMatmul: return "matmul";
    case OpTag::kAdd: return "add";
    case OpTag::kSub: return "sub";
    case OpTag::kMul: return "mul";
    case OpTag::kConcat: return "concat";
    case OpTag::kConcatRows: return "concat_rows";
    case OpTag::kSigmoid: return "sigmoid";
    case OpTag::kTanh: return "tanh";
    case OpTag::kRelu: return "relu";
    case OpTag::kMean: return "mean";
    case OpTag::kSum: return "sum";
    case OpTag::kLog: return "log";
    case OpTag::kNegate: return "negate";
    case OpTag::kSlice: return "slice";
    case OpTag::kSliceRows: return "slice_rows";
    case OpTag::kScale: return "scale";
    case OpTag::kClamp: return "clamp";
    case OpTag::kNormalizeColumns: return "normalize_columns";
  }
  return "unknown";
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw Error("graph: unknown node id");
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

const Tensor& Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) throw Error("graph: no gradient recorded for node; run backward() first");
  return n.grad;
}

OpTag Graph::tag(Var v) const { return node(v).tag; }
bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

bool Graph::any_requires_grad(std::initializer_list<std::size_t> ids) const {
  if (mode_ == GradMode::kDisabled) return false;
  return std::any_of(ids.begin(), ids.end(), [&](std::size_t i) { return nodes_[i].requires_grad; });
}

Var Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant: non-finite input value");
  Node n{.tag = OpTag::kConstant, .inputs = {}, .value = std::move(value)};
  return push(std::move(n));
}

Var Graph::parameter(Parameter& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) return Var{it->second};
  if (!param.value.all_finite()) {
    throw NumericError("parameter '" + param.name + "' holds non-finite values");
  }
  Node n{.tag = OpTag::kParameter, .inputs = {}, .value = param.value};
  n.requires_grad = mode_ == GradMode::kEnabled && !param.frozen;
  n.param = &param;
  Var v = push(std::move(n));
  param_nodes_.emplace(&param, v.id);
  return v;
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(x.shape()) + " and " +
                     shape_to_string(y.shape()));
  }
  Tensor out({x.rows(), y.cols()});
  as_matrix(out).noalias() = as_matrix(x) * as_matrix(y);
  Node n{.tag = OpTag::kMatmul, .inputs = {a.id, b.id}, .value = std::move(out)};
  n.requires_grad = any_requires_grad({a.id, b.id});
  return push(std::move(n));
}

Var Graph::elementwise_binary(OpTag tag, Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  const Broadcast kind = broadcast_kind(tag, x, y);
  Tensor out(x.shape());
  const std::size_t cols = kind == Broadcast::kNone ? x.size() : x.cols();
  const double* yv = y.data();
  for (std::size_t start = 0; start < x.size(); start += cols) {
    const double* xv = x.data() + start;
    double* ov = out.data() + start;
    switch (tag) {
      case OpTag::kAdd: for (std::size_t j = 0; j < cols; ++j) ov[j] = xv[j] + yv[j]; break;
      case OpTag::kSub: for (std::size_t j = 0; j < cols; ++j) ov[j] = xv[j] - yv[j]; break;
      default: for (std::size_t j = 0; j < cols; ++j) ov[j] = xv[j] * yv[j]; break;
    }
  }
  Node n{.tag = tag, .inputs = {a.id, b.id}, .value = std::move(out)};
  n.requires_grad = any_requires_grad({a.id, b.id});
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) { return elementwise_binary(OpTag::kAdd, a, b); }
Var Graph::sub(Var a, Var b) { return elementwise_binary(OpTag::kSub, a, b); }
Var Graph::mul(Var a, Var b) { return elementwise_binary(OpTag::kMul, a, b); }

Var Graph::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Tensor& first = value(parts[0]);
  std::size_t total = 0;
  std::vector<std::size_t> ids;
  bool req = false;
  for (Var p : parts) {
    const Tensor& t = value(p);
    if (t.rank() != first.rank() || t.rows() != first.rows()) {
      throw ShapeError("concat: incompatible shapes " + shape_to_string(first.shape()) + " and " +
                       shape_to_string(t.shape()));
    }
    total += t.cols();
    ids.push_back(p.id);
    req = req || (mode_ == GradMode::kEnabled && nodes_[p.id].requires_grad);
  }
  const std::size_t rows = first.rows();
  Tensor out(first.rank() == 1 ? Shape{total} : Shape{rows, total});
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(t.data() + r * t.cols(), t.cols(), out.data() + r * total + offset);
    }
    offset += t.cols();
  }
  Node n{.tag = OpTag::kConcat, .inputs = std::move(ids), .value = std::move(out)};
  n.requires_grad = req;
  return push(std::move(n));
}

Var Graph::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Tensor& first = value(parts[0]);
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  bool req = false;
  for (Var p : parts) {
    const Tensor& t = value(p);
    if (t.rank() != 2 || first.rank() != 2 || t.cols() != first.cols()) {
      throw ShapeError("concat_rows: incompatible shapes " + shape_to_string(first.shape()) +
                       " and " + shape_to_string(t.shape()));
    }
    rows += t.rows();
    ids.push_back(p.id);
    req = req || (mode_ == GradMode::kEnabled && nodes_[p.id].requires_grad);
  }
  Tensor out({rows, first.cols()});
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    std::copy_n(t.data(), t.size(), out.data() + offset);
    offset += t.size();
  }
  Node n{.tag = OpTag::kConcatRows, .inputs = std::move(ids), .value = std::move(out)};
  n.requires_grad = req;
  return push(std::move(n));
}

Var Graph::unary(OpTag tag, Var x, Tensor out) {
  Node n{.tag = tag, .inputs = {x.id}, .value = std::move(out)};
  n.requires_grad = any_requires_grad({x.id});
  return push(std::move(n));
}

Var Graph::sigmoid(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) v = sigmoid_scalar(v);
  return unary(OpTag::kSigmoid, x, std::move(out));
}

Var Graph::tanh(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) v = std::clamp(std::tanh(v), -kBelowOne, kBelowOne);
  return unary(OpTag::kTanh, x, std::move(out));
}

Var Graph::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return unary(OpTag::kRelu, x, std::move(out));
}

Var Graph::mean(Var x) {
  const Tensor& t = value(x);
  double s = 0.0;
  for (double v : t.values()) s += v;
  return unary(OpTag::kMean, x, Tensor::scalar(s / static_cast<double>(t.size())));
}

Var Graph::sum(Var x) {
  double s = 0.0;
  for (double v : value(x).values()) s += v;
  return unary(OpTag::kSum, x, Tensor::scalar(s));
}

Var Graph::log(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) {
    if (!(v > 0.0)) throw NumericError("log: input must be positive, got " + std::to_string(v));
    v = std::log(v);
  }
  return unary(OpTag::kLog, x, std::move(out));
}

Var Graph::negate(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) v = -v;
  return unary(OpTag::kNegate, x, std::move(out));
}

Var Graph::slice(Var x, std::size_t start, std::size_t length) {
  const Tensor& t = value(x);
  if (length == 0 || start + length > t.cols()) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside shape " +
                     shape_to_string(t.shape()));
  }
  const std::size_t rows = t.rows();
  Tensor out(t.rank() == 1 ? Shape{length} : Shape{rows, length});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(t.data() + r * t.cols() + start, length, out.data() + r * length);
  }
  Node n{.tag = OpTag::kSlice, .inputs = {x.id}, .value = std::move(out)};
  n.requires_grad = any_requires_grad({x.id});
  n.arg0 = static_cast<double>(start);
  return push(std::move(n));
}

Var Graph::slice_rows(Var x, std::size_t start, std::size_t length) {
  const Tensor& t = value(x);
  if (t.rank() != 2 || length == 0 || start + length > t.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside shape " +
                     shape_to_string(t.shape()));
  }
  Tensor out({length, t.cols()});
  std::copy_n(t.data() + start * t.cols(), length * t.cols(), out.data());
  Node n{.tag = OpTag::kSliceRows, .inputs = {x.id}, .value = std::move(out)};
  n.requires_grad = any_requires_grad({x.id});
  n.arg0 = static_cast<double>(start);
  return push(std::move(n));
}

Var Graph::scale(Var x, double factor) {
  if (!std::isfinite(factor)) throw NumericError("scale: non-finite factor");
  Tensor out = value(x);
  for (double& v : out.values()) v *= factor;
  Node n{.tag = OpTag::kScale, .inputs = {x.id}, .value = std::move(out)};
  n.requires_grad = any_requires_grad({x.id});
  n.arg0 = factor;
  return push(std::move(n));
}

Var Graph::clamp(Var x, double lo, double hi) {
  if (!(lo <= hi)) throw Error("clamp: lower bound exceeds upper bound");
  Tensor out = value(x);
  for (double& v : out.values()) v = std::clamp(v, lo, hi);
  Node n{.tag = OpTag::kClamp, .inputs = {x.id}, .value = std::move(out)};
  n.requires_grad = any_requires_grad({x.id});
  n.arg0 = lo;
  n.arg1 = hi;
  return push(std::move(n));
}

Var Graph::normalize_columns(Var x, double epsilon) {
  const Tensor& t = value(x);
  if (t.rank() != 2) {
    throw ShapeError("normalize_columns: expects rank 2, got " + shape_to_string(t.shape()));
  }
  const std::size_t m = t.rows();
  const std::size_t n = t.cols();
  std::vector<double> mean(n, 0.0);
  std::vector<double> inv_std(n, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) mean[c] += t(r, c);
  for (auto& v : mean) v /= static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double d = t(r, c) - mean[c];
      inv_std[c] += d * d;
    }
  for (auto& v : inv_std) v = 1.0 / std::sqrt(v / static_cast<double>(m) + epsilon);
  Tensor out({m, n});
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out(r, c) = (t(r, c) - mean[c]) * inv_std[c];
  Node node_{.tag = OpTag::kNormalizeColumns, .inputs = {x.id}, .value = std::move(out)};
  node_.requires_grad = any_requires_grad({x.id});
  node_.arg0 = epsilon;
  node_.aux = std::move(inv_std);
  return push(std::move(node_));
}

Var Graph::apply(OpTag tag, std::span<const Var> inputs) {
  auto need = [&](std::size_t k) {
    if (inputs.size() != k) {
      throw Error(std::string(op_name(tag)) + ": expects " + std::to_string(k) + " inputs");
    }
  };
  switch (tag) {
    case OpTag::kMatmul: need(2); return matmul(inputs[0], inputs[1]);
    case OpTag::kAdd: need(2); return add(inputs[0], inputs[1]);
    case OpTag::kSub: need(2); return sub(inputs[0], inputs[1]);
    case OpTag::kMul: need(2); return mul(inputs[0], inputs[1]);
    case OpTag::kConcat: return concat(inputs);
    case OpTag::kConcatRows: return concat_rows(inputs);
    case OpTag::kSigmoid: need(1); return sigmoid(inputs[0]);
    case OpTag::kTanh: need(1); return tanh(inputs[0]);
    case OpTag::kRelu: need(1); return relu(inputs[0]);
    case OpTag::kMean: need(1); return mean(inputs[0]);
    case OpTag::kSum: need(1); return sum(inputs[0]);
    case OpTag::kLog: need(1); return log(inputs[0]);
    case OpTag::kNegate: need(1); return negate(inputs[0]);
    default:
      throw Error(std::string(op_name(tag)) + ": needs explicit arguments; call it directly");
  }
}

void Graph::backward(Var loss) {
  if (mode_ == GradMode::kDisabled) throw Error("backward: graph was built without gradients");
  const Node& target = node(loss);
  if (target.value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_to_string(target.value.shape()));
  }
  for (std::size_t i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    if (n.requires_grad) {
      if (n.grad.shape() == n.value.shape()) {
        n.grad.fill(0.0);
      } else {
        n.grad = Tensor::zeros(n.value.shape());
      }
    }
  }
  for (std::size_t i = loss.id + 1; i < nodes_.size(); ++i) nodes_[i].grad = Tensor();
  if (nodes_[loss.id].requires_grad) {
    nodes_[loss.id].grad[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      if (nodes_[i].requires_grad) backprop_node(i);
    }
  }
  for (auto& n : nodes_) {
    if (n.tag == OpTag::kParameter && n.param != nullptr && n.requires_grad) {
      n.param->grad = n.grad.empty() ? Tensor::zeros(n.value.shape()) : n.grad;
    }
  }
}

void Graph::backprop_node(std::size_t id) {
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  auto input_grad = [&](std::size_t k) -> Tensor* {
    Node& in = nodes_[n.inputs[k]];
    return in.requires_grad ? &in.grad : nullptr;
  };
  auto input_value = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };

  switch (n.tag) {
    case OpTag::kConstant:
    case OpTag::kParameter:
      return;
    case OpTag::kMatmul: {
      if (Tensor* ga = input_grad(0)) {
        as_matrix(*ga).noalias() += as_matrix(g) * as_matrix(input_value(1)).transpose();
      }
      if (Tensor* gb = input_grad(1)) {
        as_matrix(*gb).noalias() += as_matrix(input_value(0)).transpose() * as_matrix(g);
      }
      return;
    }
    case OpTag::kAdd:
    case OpTag::kSub:
    case OpTag::kMul: {
      const Tensor& a = input_value(0);
      const Tensor& b = input_value(1);
      const bool bcast = a.shape() != b.shape();
      const std::size_t cols = a.cols();
      if (Tensor* ga = input_grad(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double rhs = bcast ? b[i % cols] : b[i];
          (*ga)[i] += n.tag == OpTag::kMul ? g[i] * rhs : g[i];
        }
      }
      if (Tensor* gb = input_grad(1)) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          double d = g[i];
          if (n.tag == OpTag::kSub) d = -d;
          if (n.tag == OpTag::kMul) d *= a[i];
          (*gb)[bcast ? i % cols : i] += d;
        }
      }
      return;
    }
    case OpTag::kConcat: {
      const std::size_t rows = g.rows();
      const std::size_t total = g.cols();
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t w = input_value(k).cols();
        if (Tensor* gi = input_grad(k)) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c) (*gi)[r * w + c] += g[r * total + offset + c];
        }
        offset += w;
      }
      return;
    }
    case OpTag::kConcatRows: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t sz = input_value(k).size();
        if (Tensor* gi = input_grad(k)) {
          for (std::size_t i = 0; i < sz; ++i) (*gi)[i] += g[offset + i];
        }
        offset += sz;
      }
      return;
    }
    case OpTag::kSigmoid: {
      Tensor* gi = input_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = n.value[i];
        (*gi)[i] += g[i] * y * (1.0 - y);
      }
      return;
    }
    case OpTag::kTanh: {
      Tensor* gi = input_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = n.value[i];
        (*gi)[i] += g[i] * (1.0 - y * y);
      }
      return;
    }
    case OpTag::kRelu: {
      Tensor* gi = input_grad(0);
      const Tensor& x = input_value(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] > 0.0) (*gi)[i] += g[i];
      }
      return;
    }
    case OpTag::kMean:
    case OpTag::kSum: {
      Tensor* gi = input_grad(0);
      double d = g[0];
      if (n.tag == OpTag::kMean) d /= static_cast<double>(gi->size());
      for (double& v : gi->values()) v += d;
      return;
    }
    case OpTag::kLog: {
      Tensor* gi = input_grad(0);
      const Tensor& x = input_value(0);
      for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i] / x[i];
      return;
    }
    case OpTag::kNegate: {
      Tensor* gi = input_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] -= g[i];
      return;
    }
    case OpTag::kScale: {
      Tensor* gi = input_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += n.arg0 * g[i];
      return;
    }
    case OpTag::kClamp: {
      Tensor* gi = input_grad(0);
      const Tensor& x = input_value(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] >= n.arg0 && x[i] <= n.arg1) (*gi)[i] += g[i];
      }
      return;
    }
    case OpTag::kSlice: {
      Tensor* gi = input_grad(0);
      const auto start = static_cast<std::size_t>(n.arg0);
      const std::size_t len = g.cols();
      const std::size_t in_cols = gi->cols();
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < len; ++c) (*gi)[r * in_cols + start + c] += g[r * len + c];
      return;
    }
    case OpTag::kSliceRows: {
      Tensor* gi = input_grad(0);
      const std::size_t offset = static_cast<std::size_t>(n.arg0) * g.cols();
      for (std::size_t i = 0; i < g.size(); ++i) (*gi)[offset + i] += g[i];
      return;
    }
    case OpTag::kNormalizeColumns: {
      Tensor* gi = input_grad(0);
      const std::size_t m = g.rows();
      const std::size_t cols = g.cols();
      const auto md = static_cast<double>(m);
      for (std::size_t c = 0; c < cols; ++c) {
        double sum_g = 0.0;
        double sum_gy = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
          sum_g += g(r, c);
          sum_gy += g(r, c) * n.value(r, c);
        }
        const double k = n.aux[c] / md;
        for (std::size_t r = 0; r < m; ++r) {
          (*gi)(r, c) += k * (md * g(r, c) - sum_g - n.value(r, c) * sum_gy);
        }
      }
      return;
    }
  }
}

}  // namespace wmattr::ad
