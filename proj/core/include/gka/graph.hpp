#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gka/tensor.hpp"

namespace gka {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Define-by-run tape for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so inputs always precede the
/// node that consumes them and the node sequence is a topological order.
/// A graph is meant to be built, differentiated, and discarded per batch.
/// It is not thread-safe; separate graphs may be used concurrently.
class Graph {
 public:
  struct BackwardContext {
    const Tensor& grad_out;
    const Tensor& out;
    std::span<const Tensor* const> inputs;
    /// Accumulators for each input; nullptr where the input needs no gradient.
    std::span<Tensor* const> input_grads;
  };
  using BackwardFn = std::function<void(const BackwardContext&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that receives a gradient.
  Var parameter(Tensor value);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() loss with respect to v.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;
  std::string_view op_name(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients in reverse node order.
  /// Re-running backward on the same graph recomputes from scratch.
  void backward(Var loss);

  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Appends an op node. Throws NumericError naming `op` if `value` is not finite.
  Var record(std::string_view op, std::span<const Var> inputs, Tensor value, BackwardFn backward);

 private:
  struct Node {
    std::string_view op;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    BackwardFn backward;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool has_backward_ = false;
};

// Op vocabulary. All ops check shapes and throw ShapeError naming both
// operands on mismatch. Broadcasting is limited to a scalar over any tensor
// and a row vector (n,) over an (m, n) matrix, always on the right operand.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
/// a (m, n) with row i multiplied by s[i]; s has shape (m,) or (m, 1).
Var scale_rows(Var a, Var s);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var reshape(Var a, Shape shape);
Var softmax_rows(Var a);
Var exp(Var a);
/// Natural log of max(a, 1e-12).
Var log(Var a);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var square(Var a);
Var reciprocal(Var a);
Var clamp(Var a, double lo, double hi);
/// Elementwise Huber penalty: r^2/2 for |r| <= delta, delta(|r| - delta/2) otherwise.
Var huber(Var r, double delta);
Var sum(Var a);
Var mean(Var a);
/// Divides each slice along the last axis by max(||v||_2, 1e-12).
Var l2_normalize(Var a);
/// out[i, :] = sum_j w[i, j] * k[i, j, :] for w (b, k) and k (b, k, p).
Var batch_matvec(Var w, Var k);

inline constexpr double kNormEpsilon = 1e-12;

}  // namespace gka
