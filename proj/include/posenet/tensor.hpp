// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace posenet {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

enum class Padding { kSymmetric, kCausal };

std::string_view padding_name(Padding padding);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient arrives
  bool requires_grad = false;
};

/// Dense row-major array of 64-bit reals. Copies share storage; use clone()
/// for a deep copy.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const { return impl_->shape; }
  std::int64_t rank() const { return static_cast<std::int64_t>(impl_->shape.size()); }
  // Negative axes count from the back.
  std::int64_t dim(std::int64_t axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  std::span<const double> data() const { return impl_->data; }
  // Mutation is reserved for building inputs and for optimizer updates
  // between steps; values recorded in a live graph must not be touched.
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool value);
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  Tensor clone() const;
  Tensor detach() const;
  bool all_finite() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor wrap(std::shared_ptr<TensorImpl> impl);

  std::shared_ptr<TensorImpl> impl_;
};

Tensor wrap(std::shared_ptr<TensorImpl> impl);

/// Boolean tensor; true marks an allowed / real entry.
class Mask {
 public:
  Mask() = default;
  Mask(Shape shape, bool value);
  Mask(Shape shape, std::vector<std::uint8_t> bits);

  static Mask causal(std::int64_t length);

  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::int64_t axis) const;
  bool operator[](std::int64_t flat) const { return bits_[static_cast<std::size_t>(flat)] != 0; }
  bool at(std::int64_t row, std::int64_t col) const;
  void set(std::int64_t flat, bool value) { bits_[static_cast<std::size_t>(flat)] = value ? 1 : 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::int64_t count() const;

  bool operator==(const Mask&) const = default;

 private:
  Shape shape_;
  std::vector<std::uint8_t> bits_;
};

/// Integer token ids laid out as [rows, cols].
class IdMatrix {
 public:
  IdMatrix() = default;
  IdMatrix(std::int64_t rows, std::int64_t cols, std::int64_t fill = 0);
  IdMatrix(std::int64_t rows, std::int64_t cols, std::vector<std::int64_t> ids);

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  std::int64_t operator()(std::int64_t r, std::int64_t c) const {
    return ids_[static_cast<std::size_t>(r * cols_ + c)];
  }
  std::int64_t& operator()(std::int64_t r, std::int64_t c) { return ids_[static_cast<std::size_t>(r * cols_ + c)]; }
  std::span<const std::int64_t> row(std::int64_t r) const {
    return std::span<const std::int64_t>(ids_).subspan(static_cast<std::size_t>(r * cols_),
                                                       static_cast<std::size_t>(cols_));
  }
  std::span<const std::int64_t> flat() const { return ids_; }

  // Leading columns [0, cols).
  IdMatrix prefix(std::int64_t cols) const;

  bool operator==(const IdMatrix&) const = default;

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<std::int64_t> ids_;
};

/// Attributes recorded with a graph node so traces can be inspected.
struct OpAttrs {
  std::int64_t dilation = 0;
  Padding padding = Padding::kSymmetric;
};

struct GraphNode {
  std::string tag;
  std::string scope;
  OpAttrs attrs;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::shared_ptr<TensorImpl> output;
  // Reads the output's grad and accumulates into inputs that require grad.
  std::function<void(const TensorImpl& out)> backward;
};

/// Ordered record of executed operations. While a Graph is active on the
/// current thread (see GraphScope) every operation appends a node, so
/// insertion order is a topological order.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  void record(GraphNode node);
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  std::size_t count(std::string_view tag) const;
  std::size_t count(std::string_view tag, std::string_view scope) const;

  /// Reverse sweep from a scalar loss; gradients accumulate by addition.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }

 private:
  std::vector<GraphNode> nodes_;
};

/// Makes `graph` the active graph on this thread for the scope's lifetime.
class GraphScope {
 public:
  explicit GraphScope(Graph& graph);
  ~GraphScope();
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

 private:
  Graph* previous_;
};

/// Labels nodes recorded inside it (e.g. "encoder", "decoder").
class TraceScope {
 public:
  explicit TraceScope(std::string name);
  ~TraceScope();
  TraceScope(const TraceScope&) = delete;
  TraceScope& operator=(const TraceScope&) = delete;

 private:
  std::string previous_;
};

Graph* active_graph();

/// Backward through the active graph.
void backward(const Tensor& loss);

namespace detail {

using BackwardFn = std::function<void(const TensorImpl& out)>;  // same as GraphNode::backward

// Builds an op result, records a node on the active graph and wires the
// backward rule when any input requires grad.
Tensor make_result(std::string_view tag, Shape shape, std::vector<double> data,
                   std::initializer_list<const Tensor*> inputs, BackwardFn backward,
                   OpAttrs attrs = {});
Tensor make_result(std::string_view tag, Shape shape, std::vector<double> data,
                   const std::vector<Tensor>& inputs, BackwardFn backward,
                   OpAttrs attrs = {});

// Gradient buffer of `impl`, allocated on first use.
std::vector<double>& grad_buffer(TensorImpl& impl);

}  // namespace detail

}  // namespace posenet
