#include "gka/layers.hpp"

#include <cmath>

namespace gka {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w(Shape{fan_in, fan_out});
  for (double& v : w.data()) v = rng.uniform(-limit, limit);
  return w;
}

Affine Affine::glorot(std::size_t in, std::size_t out, Rng& rng) {
  return Affine{glorot_uniform(in, out, rng), Tensor(Shape{out}, 0.0)};
}

Affine Affine::zeros(std::size_t in, std::size_t out) {
  return Affine{Tensor(Shape{in, out}, 0.0), Tensor(Shape{out}, 0.0)};
}

Mlp2 Mlp2::glorot(std::size_t in, std::size_t width, std::size_t out, Rng& rng) {
  Affine hidden = Affine::glorot(in, width, rng);
  Affine output = Affine::glorot(width, out, rng);
  return Mlp2{std::move(hidden), std::move(output)};
}

Var Binder::operator()(const Tensor& parameter) {
  auto it = bound_.find(&parameter);
  if (it != bound_.end()) return it->second;
  Var v = graph_.parameter(parameter);
  bound_.emplace(&parameter, v);
  return v;
}

Var Binder::find(const Tensor& parameter) const {
  auto it = bound_.find(&parameter);
  return it == bound_.end() ? Var{} : it->second;
}

Var apply(Binder& bind, const Affine& layer, Var x) {
  return add(matmul(x, bind(layer.weight)), bind(layer.bias));
}

Var apply(Binder& bind, const Mlp2& net, Var x) {
  return apply(bind, net.output, tanh(apply(bind, net.hidden, x)));
}

}  // namespace gka
