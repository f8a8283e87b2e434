#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>

#include "gka/graph.hpp"
#include "gka/rng.hpp"
#include "gka/tensor.hpp"

namespace gka {

/// y = x W + b with W (in, out) and b (out,).
struct Affine {
  Tensor weight;
  Tensor bias;

  static Affine glorot(std::size_t in, std::size_t out, Rng& rng);
  static Affine zeros(std::size_t in, std::size_t out);

  std::size_t in() const { return weight.dim(0); }
  std::size_t out() const { return weight.dim(1); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

/// Two affine layers with tanh between.
struct Mlp2 {
  Affine hidden;
  Affine output;

  static Mlp2 glorot(std::size_t in, std::size_t width, std::size_t out, Rng& rng);

  std::size_t in() const { return hidden.in(); }
  std::size_t out() const { return output.out(); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    hidden.visit(prefix + ".hidden", f);
    output.visit(prefix + ".output", f);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    hidden.visit(prefix + ".hidden", f);
    output.visit(prefix + ".output", f);
  }
};

/// Maps parameter tensors onto graph leaves. Each tensor is bound at most
/// once per graph, so a parameter used twice accumulates both gradients.
class Binder {
 public:
  explicit Binder(Graph& graph) : graph_(graph) {}

  Graph& graph() const { return graph_; }
  Var operator()(const Tensor& parameter);
  /// Leaf bound to `parameter`, or an invalid Var if it was never used.
  Var find(const Tensor& parameter) const;

 private:
  Graph& graph_;
  std::unordered_map<const Tensor*, Var> bound_;
};

Var apply(Binder& bind, const Affine& layer, Var x);
Var apply(Binder& bind, const Mlp2& net, Var x);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace gka
