#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "aair/error.hpp"

namespace aair {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major array of doubles. Rank 0 (scalar), 1 and 2 are used.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  bool operator==(const Tensor&) const = default;
};

class Graph;

// Handle to a node of a live computation graph.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  std::size_t size() const { return value().size(); }
  Graph& graph() const;
  std::uint32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::uint32_t id, std::uint64_t generation)
      : graph_(g), id_(id), generation_(generation) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
  std::uint64_t generation_ = 0;
};

// Define-by-run tape. Nodes are appended in evaluation order, so the node
// vector is already topologically sorted; backward sweeps it in reverse.
class Graph {
 public:
  // Receives the gradient reaching this node and the node's own forward value.
  using Backward =
      std::function<void(Graph&, const std::vector<double>& out_grad, const Tensor& out_value)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  // Leaf that reads `value` in place and accumulates its gradient into `grad_sink`.
  // Both must outlive the graph (or the next reset()).
  Var parameter(const Tensor& value, Tensor& grad_sink);
  // Non-trainable leaf reading `value` in place.
  Var reference(const Tensor& value);

  const Tensor& value(const Var& v) const;
  bool requires_grad(const Var& v) const;
  // Gradient of a leaf or intermediate after backward(); zeros if none reached it.
  Tensor gradient(const Var& v) const;

  void backward(const Var& loss);
  void reset();

  std::size_t node_count() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

  // Records an op result. `inputs` decide requires-grad; `fn` runs only when the
  // result receives gradient.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, Backward fn);
  Var record(const char* op, Tensor value, const std::vector<Var>& inputs, Backward fn);

  // Lazily allocated gradient accumulator of an input node.
  std::vector<double>& grad_buffer(const Var& v);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor* grad_sink = nullptr;
    std::vector<double> grad;
    Backward backward;
    bool requires_grad = false;
  };

  void check(const Var& v) const;
  const Tensor& node_value(const Node& n) const { return n.external ? *n.external : n.owned; }

  std::deque<Node> nodes_;
  std::uint64_t generation_ = 1;
  bool backward_done_ = false;
};

}  // namespace aair
