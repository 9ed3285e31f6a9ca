// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace posenet {

namespace {

// Every op allocates fresh buffers of a few hundred KB. glibc would serve
// those with mmap/munmap and spend more time in the kernel than in the math.
[[maybe_unused]] const bool kAllocatorTuned = [] {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  return true;
}();

}  // namespace

namespace {

thread_local Graph* g_active_graph = nullptr;
thread_local std::string g_trace_scope;

}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto extent : shape) {
    if (extent < 0) throw std::invalid_argument("negative extent in shape " + shape_string(shape));
    n *= extent;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::string_view padding_name(Padding padding) {
  return padding == Padding::kCausal ? "causal" : "symmetric";
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) { impl_->data.assign(1, 0.0); }

Tensor::Tensor(Shape shape, std::vector<double> data) : impl_(std::make_shared<TensorImpl>()) {
  if (posenet::numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_string(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto n = static_cast<std::size_t>(posenet::numel(shape));
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

std::int64_t Tensor::dim(std::int64_t axis) const {
  const auto r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for shape " +
                            shape_string(shape()));
  }
  return impl_->shape[static_cast<std::size_t>(axis)];
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
  if (static_cast<std::int64_t>(index.size()) != rank()) {
    throw std::invalid_argument("index rank does not match shape " + shape_string(shape()));
  }
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    const auto extent = impl_->shape[axis++];
    if (i < 0 || i >= extent) throw std::out_of_range("tensor index out of range");
    flat = flat * extent + i;
  }
  return impl_->data[static_cast<std::size_t>(flat)];
}

Tensor& Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  return *this;
}

Tensor Tensor::clone() const {
  auto copy = std::make_shared<TensorImpl>(*impl_);
  return Tensor(std::move(copy));
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data); }

bool Tensor::all_finite() const {
  return std::all_of(impl_->data.begin(), impl_->data.end(), [](double v) { return std::isfinite(v); });
}

Tensor wrap(std::shared_ptr<TensorImpl> impl) { return Tensor(std::move(impl)); }

Mask::Mask(Shape shape, bool value)
    : shape_(std::move(shape)), bits_(static_cast<std::size_t>(numel(shape_)), value ? 1 : 0) {}

Mask::Mask(Shape shape, std::vector<std::uint8_t> bits) : shape_(std::move(shape)), bits_(std::move(bits)) {
  if (numel(shape_) != static_cast<std::int64_t>(bits_.size())) {
    throw std::invalid_argument("mask length does not match shape " + shape_string(shape_));
  }
}

Mask Mask::causal(std::int64_t length) {
  Mask mask({length, length}, false);
  for (std::int64_t i = 0; i < length; ++i) {
    for (std::int64_t j = 0; j <= i; ++j) mask.set(i * length + j, true);
  }
  return mask;
}

std::int64_t Mask::dim(std::int64_t axis) const {
  const auto r = static_cast<std::int64_t>(shape_.size());
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw std::out_of_range("mask axis out of range");
  return shape_[static_cast<std::size_t>(axis)];
}

bool Mask::at(std::int64_t row, std::int64_t col) const {
  if (shape_.size() != 2) throw std::invalid_argument("Mask::at requires a rank-2 mask");
  return bits_[static_cast<std::size_t>(row * shape_[1] + col)] != 0;
}

std::int64_t Mask::count() const { return std::accumulate(bits_.begin(), bits_.end(), std::int64_t{0}); }

IdMatrix::IdMatrix(std::int64_t rows, std::int64_t cols, std::int64_t fill)
    : rows_(rows), cols_(cols), ids_(static_cast<std::size_t>(rows * cols), fill) {}

IdMatrix::IdMatrix(std::int64_t rows, std::int64_t cols, std::vector<std::int64_t> ids)
    : rows_(rows), cols_(cols), ids_(std::move(ids)) {
  if (rows * cols != static_cast<std::int64_t>(ids_.size())) {
    throw std::invalid_argument("id matrix length does not match [" + std::to_string(rows) + "," +
                                std::to_string(cols) + "]");
  }
}

IdMatrix IdMatrix::prefix(std::int64_t cols) const {
  if (cols < 0 || cols > cols_) throw std::out_of_range("id prefix longer than matrix");
  IdMatrix out(rows_, cols);
  for (std::int64_t r = 0; r < rows_; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) out(r, c) = (*this)(r, c);
  }
  return out;
}

void Graph::record(GraphNode node) { nodes_.push_back(std::move(node)); }

std::size_t Graph::count(std::string_view tag) const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [&](const GraphNode& n) { return n.tag == tag; }));
}

std::size_t Graph::count(std::string_view tag, std::string_view scope) const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [&](const GraphNode& n) {
    return n.tag == tag && n.scope == scope;
  }));
}

void Graph::backward(const Tensor& loss) {
  if (loss.numel() != 1 || loss.rank() != 0) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) throw std::invalid_argument("loss is not connected to any tracked tensor");
  auto& seed = detail::grad_buffer(*loss.impl());
  seed[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->backward && !it->output->grad.empty()) it->backward(*it->output);
  }
}

GraphScope::GraphScope(Graph& graph) : previous_(g_active_graph) { g_active_graph = &graph; }

GraphScope::~GraphScope() { g_active_graph = previous_; }

TraceScope::TraceScope(std::string name) : previous_(std::exchange(g_trace_scope, std::move(name))) {}

TraceScope::~TraceScope() { g_trace_scope = std::move(previous_); }

Graph* active_graph() { return g_active_graph; }

void backward(const Tensor& loss) {
  if (g_active_graph == nullptr) throw std::logic_error("backward called with no active graph");
  g_active_graph->backward(loss);
}

namespace detail {

std::vector<double>& grad_buffer(TensorImpl& impl) {
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0);
  return impl.grad;
}

namespace {

template <typename Range>
Tensor make_result_impl(std::string_view tag, Shape shape, std::vector<double> data, const Range& inputs,
                        BackwardFn backward, OpAttrs attrs) {
  Tensor out(std::move(shape), std::move(data));
  Graph* graph = g_active_graph;
  if (graph == nullptr) return out;

  GraphNode node;
  node.tag = std::string(tag);
  node.scope = g_trace_scope;
  node.attrs = attrs;
  node.output = out.impl();
  bool tracked = false;
  for (const Tensor* t : inputs) {
    node.inputs.push_back(t->impl());
    tracked = tracked || t->requires_grad();
  }
  if (tracked && backward) {
    out.set_requires_grad(true);
    node.backward = std::move(backward);
  }
  graph->record(std::move(node));
  return out;
}

}  // namespace

Tensor make_result(std::string_view tag, Shape shape, std::vector<double> data,
                   std::initializer_list<const Tensor*> inputs, BackwardFn backward, OpAttrs attrs) {
  return make_result_impl(tag, std::move(shape), std::move(data), inputs, std::move(backward), attrs);
}

Tensor make_result(std::string_view tag, Shape shape, std::vector<double> data,
                   const std::vector<Tensor>& inputs, BackwardFn backward, OpAttrs attrs) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(inputs.size());
  for (const auto& t : inputs) ptrs.push_back(&t);
  return make_result_impl(tag, std::move(shape), std::move(data), ptrs, std::move(backward), attrs);
}

}  // namespace detail

}  // namespace posenet
