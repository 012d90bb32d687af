// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wmattr Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wmattr/autodiff/tensor.hpp"

namespace wmattr::ad {

/// A trainable array owned by a model. The graph reads `value` and, after
/// backward(), writes `grad`. Frozen parameters are treated as constants: their
/// grad buffer is never allocated by the graph.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;
};

enum class OpTag : std::uint8_t {
  kConstant,
  kParameter,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kConcat,
  kConcatRows,
  kSigmoid,
  kTanh,
  kRelu,
  kMean,
  kSum,
  kLog,
  kNegate,
  kSlice,
  kSliceRows,
  kScale,
  kClamp,
  kNormalizeColumns,
};

std::string_view op_name(OpTag tag) noexcept;

/// Handle to a node of a Graph.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
  bool valid() const noexcept { return id != kInvalid; }
};

enum class GradMode { kEnabled, kDisabled };

/// Eagerly evaluated computation graph with reverse-mode differentiation.
///
/// Every operation computes its value immediately and appends a node, so the
/// node list is a topological order by construction. backward() walks it once
/// in reverse. The graph never mutates node values after creation, so calling
/// backward() repeatedly yields identical gradients.
///
/// add/sub/mul accept either equal shapes or a right operand of shape [n] or
/// [1,n] broadcast over the rows of an [m,n] left operand.
class Graph {
 public:
  explicit Graph(GradMode mode = GradMode::kEnabled) : mode_(mode) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  Var constant(Tensor value);
  /// Registers a parameter leaf. Registering the same parameter twice returns
  /// the same node.
  Var parameter(Parameter& param);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var concat(std::span<const Var> parts);
  Var concat(Var a, Var b) { return concat(std::span<const Var>({a, b})); }
  Var concat_rows(std::span<const Var> parts);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var relu(Var x);
  Var mean(Var x);
  Var sum(Var x);
  Var log(Var x);
  Var negate(Var x);
  Var slice(Var x, std::size_t start, std::size_t length);
  Var slice_rows(Var x, std::size_t start, std::size_t length);
  Var scale(Var x, double factor);
  Var clamp(Var x, double lo, double hi);
  /// Per-column standardization with the batch's own (biased) statistics.
  Var normalize_columns(Var x, double epsilon);

  /// Dispatch by tag for the parameter-free primitives.
  Var apply(OpTag tag, std::span<const Var> inputs);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() target with respect to `v`.
  const Tensor& grad(Var v) const;
  OpTag tag(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  GradMode mode() const noexcept { return mode_; }

  /// Reverse-mode sweep from a scalar node. Writes the gradient of every
  /// non-frozen registered parameter into Parameter::grad (zeros when the
  /// parameter has no path to the loss).
  void backward(Var loss);

 private:
  struct Node {
    OpTag tag = OpTag::kConstant;
    std::vector<std::size_t> inputs{};
    Tensor value{};
    Tensor grad{};
    bool requires_grad = false;
    Parameter* param = nullptr;
    double arg0 = 0.0;
    double arg1 = 0.0;
    std::vector<double> aux{};
  };

  const Node& node(Var v) const;
  bool any_requires_grad(std::initializer_list<std::size_t> ids) const;
  Var push(Node node);
  Var elementwise_binary(OpTag tag, Var a, Var b);
  Var unary(OpTag tag, Var x, Tensor out);
  void backprop_node(std::size_t id);

  GradMode mode_;
  std::deque<Node> nodes_;  // deque keeps value references stable across pushes
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

}  // namespace wmattr::ad
