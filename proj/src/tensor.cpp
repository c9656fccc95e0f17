#include "aair/tensor.hpp"

#include <cmath>
#include <sstream>

namespace aair {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::EmptySupport: return "empty-support";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Lifecycle: return "lifecycle";
    case ErrorKind::Vocabulary: return "vocabulary";
    case ErrorKind::Bounds: return "bounds";
    case ErrorKind::DataIntegrity: return "data-integrity";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::NumericFault: return "numeric";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
    case ErrorKind::Lookup: return "lookup";
  }
  return "unknown";
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  require(shape_size(shape) == data.size(), ErrorKind::Dimension,
          "tensor shape " + shape_string(shape) + " does not match " +
              std::to_string(data.size()) + " values");
}

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

const Tensor& Var::value() const { return graph().value(*this); }

Graph& Var::graph() const {
  require(graph_ != nullptr, ErrorKind::Lifecycle, "variable is not attached to a graph");
  return *graph_;
}

void Graph::check(const Var& v) const {
  require(v.graph_ == this, ErrorKind::Lifecycle, "variable belongs to a different graph");
  require(v.generation_ == generation_ && v.id_ < nodes_.size(), ErrorKind::Lifecycle,
          "variable refers to a graph that has been reset");
}

Var Graph::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

Var Graph::leaf(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

Var Graph::parameter(const Tensor& value, Tensor& grad_sink) {
  require(grad_sink.shape == value.shape, ErrorKind::Dimension,
          "gradient sink " + shape_string(grad_sink.shape) + " does not match parameter " +
              shape_string(value.shape));
  Node n;
  n.external = &value;
  n.grad_sink = &grad_sink;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

Var Graph::reference(const Tensor& value) {
  Node n;
  n.external = &value;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

const Tensor& Graph::value(const Var& v) const {
  check(v);
  return node_value(nodes_[v.id_]);
}

bool Graph::requires_grad(const Var& v) const {
  check(v);
  return nodes_[v.id_].requires_grad;
}

Tensor Graph::gradient(const Var& v) const {
  check(v);
  const Node& n = nodes_[v.id_];
  if (n.grad_sink) return *n.grad_sink;
  Tensor g(node_value(n).shape, 0.0);
  if (!n.grad.empty()) g.data = n.grad;
  return g;
}

std::vector<double>& Graph::grad_buffer(const Var& v) {
  check(v);
  Node& n = nodes_[v.id_];
  if (n.grad_sink) return n.grad_sink->data;
  if (n.grad.empty()) n.grad.assign(node_value(n).size(), 0.0);
  return n.grad;
}

Var Graph::record(const char* op, Tensor value, std::initializer_list<Var> inputs, Backward fn) {
  return record(op, std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Graph::record(const char* op, Tensor value, const std::vector<Var>& inputs, Backward fn) {
  require(!backward_done_, ErrorKind::Lifecycle, "cannot record after backward; reset the graph");
  for (double x : value.data) {
    if (!std::isfinite(x)) fail(ErrorKind::NumericFault, std::string("non-finite value produced by ") + op);
  }
  bool needs = false;
  for (const auto& in : inputs) {
    check(in);
    needs = needs || nodes_[in.id_].requires_grad;
  }
  Node n;
  n.owned = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

void Graph::backward(const Var& loss) {
  check(loss);
  require(!backward_done_, ErrorKind::Lifecycle, "backward already ran on this graph");
  const Tensor& lv = node_value(nodes_[loss.id_]);
  require(lv.size() == 1, ErrorKind::Contract,
          "backward needs a scalar loss, got shape " + shape_string(lv.shape));
  backward_done_ = true;
  if (!nodes_[loss.id_].requires_grad) return;
  grad_buffer(loss)[0] += 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad, node_value(n));
  }
}

void Graph::reset() {
  nodes_.clear();
  ++generation_;
  backward_done_ = false;
}

}  // namespace aair
