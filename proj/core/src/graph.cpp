#include "gka/graph.hpp"

#include <algorithm>
#include <cmath>

#include "gka/error.hpp"

namespace gka {

const Tensor& Var::value() const { return graph_->value(*this); }

Var Graph::constant(Tensor value) { return record("constant", {}, std::move(value), nullptr); }

Var Graph::parameter(Tensor value) {
  Var v = record("parameter", {}, std::move(value), nullptr);
  nodes_.back().requires_grad = true;
  return v;
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph_ != this || v.id_ >= nodes_.size()) throw Error("variable does not belong to this graph");
  return nodes_[v.id_];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

std::string_view Graph::op_name(Var v) const { return node(v).op; }

const Tensor& Graph::grad(Var v) const {
  const Node& n = node(v);
  if (!has_backward_) throw Error("grad() called before backward()");
  if (!n.requires_grad) throw Error("node '" + std::string(n.op) + "' does not require a gradient");
  return grads_[v.id_];
}

Var Graph::record(std::string_view op, std::span<const Var> inputs, Tensor value, BackwardFn backward) {
  if (!value.all_finite()) throw NumericError("non-finite output from op '" + std::string(op) + "'");
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    const Node& src = node(in);
    n.inputs.push_back(in.id_);
    n.requires_grad = n.requires_grad || src.requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Graph::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.size() != 1 || root.value.rank() > 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + to_string(root.value.shape()));
  }
  grads_.assign(nodes_.size(), Tensor{});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].requires_grad) grads_[i] = Tensor(nodes_[i].value.shape(), 0.0);
  }
  has_backward_ = true;
  if (!root.requires_grad) return;
  grads_[loss.id_].fill(1.0);

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::uint32_t src : n.inputs) {
      in_values.push_back(&nodes_[src].value);
      in_grads.push_back(nodes_[src].requires_grad ? &grads_[src] : nullptr);
    }
    n.backward(BackwardContext{grads_[i], n.value, in_values, in_grads});
  }
}

namespace {

Graph& same_graph(Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.graph() != &b.graph()) throw Error("operands belong to different graphs");
  return a.graph();
}

[[noreturn]] void shape_mismatch(std::string_view op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

enum class Broadcast { same, row, scalar };

Broadcast broadcast_kind(std::string_view op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::same;
  if (b.empty() || (b.size() == 1 && b[0] == 1 && a.size() != 1)) return Broadcast::scalar;
  if (a.size() == 2 && b.size() == 1 && b[0] == a[1]) return Broadcast::row;
  shape_mismatch(op, a, b);
}

// Reduces a gradient shaped like `a` onto the broadcast operand b.
void accumulate_broadcast(Broadcast kind, const Tensor& g, Tensor& gb, double sign) {
  switch (kind) {
    case Broadcast::same:
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      break;
    case Broadcast::scalar: {
      double s = 0.0;
      for (double v : g.data()) s += v;
      gb[0] += sign * s;
      break;
    }
    case Broadcast::row: {
      const std::size_t n = gb.size();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += sign * g[i];
      break;
    }
  }
}

Var add_or_sub(Var a, Var b, double sign, std::string_view op) {
  Graph& graph = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind(op, av.shape(), bv.shape());
  Tensor out = av;
  const std::size_t nb = bv.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * bv[kind == Broadcast::same ? i : i % nb];
  const Var inputs[] = {a, b};
  return graph.record(op, inputs, std::move(out), [kind, sign](const Graph::BackwardContext& ctx) {
    if (Tensor* ga = ctx.input_grads[0]) {
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += ctx.grad_out[i];
    }
    if (Tensor* gb = ctx.input_grads[1]) accumulate_broadcast(kind, ctx.grad_out, *gb, sign);
  });
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename F, typename D>
Var unary(Var a, std::string_view op, F f, D dfdx) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  const Var inputs[] = {a};
  return a.graph().record(op, inputs, std::move(out), [dfdx](const Graph::BackwardContext& ctx) {
    Tensor* ga = ctx.input_grads[0];
    if (!ga) return;
    const Tensor& x = *ctx.inputs[0];
    for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += ctx.grad_out[i] * dfdx(x[i], ctx.out[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& graph = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) shape_mismatch("matmul", av.shape(), bv.shape());
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double x = av(i, l);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += x * bv(l, j);
    }
  }
  const Var inputs[] = {a, b};
  return graph.record("matmul", inputs, std::move(out), [m, k, n](const Graph::BackwardContext& ctx) {
    const Tensor& g = ctx.grad_out;
    const Tensor& x = *ctx.inputs[0];
    const Tensor& w = *ctx.inputs[1];
    if (Tensor* ga = ctx.input_grads[0]) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g(i, j) * w(l, j);
          (*ga)(i, l) += s;
        }
    }
    if (Tensor* gb = ctx.input_grads[1]) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
          const double xv = x(i, l);
          for (std::size_t j = 0; j < n; ++j) (*gb)(l, j) += xv * g(i, j);
        }
    }
  });
}

Var add(Var a, Var b) { return add_or_sub(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_or_sub(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  Graph& graph = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = broadcast_kind("mul", av.shape(), bv.shape());
  const std::size_t nb = bv.size();
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[kind == Broadcast::same ? i : i % nb];
  const Var inputs[] = {a, b};
  return graph.record("mul", inputs, std::move(out), [kind, nb](const Graph::BackwardContext& ctx) {
    const Tensor& x = *ctx.inputs[0];
    const Tensor& y = *ctx.inputs[1];
    if (Tensor* ga = ctx.input_grads[0])
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += ctx.grad_out[i] * y[kind == Broadcast::same ? i : i % nb];
    if (Tensor* gb = ctx.input_grads[1]) {
      Tensor g(x.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = ctx.grad_out[i] * x[i];
      accumulate_broadcast(kind, g, *gb, 1.0);
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, "scale", [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(a, "add_scalar", [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var scale_rows(Var a, Var s) {
  Graph& graph = same_graph(a, s);
  const Tensor& av = a.value();
  const Tensor& sv = s.value();
  const bool ok = av.rank() == 2 && sv.size() == av.rows() &&
                  (sv.rank() == 1 || (sv.rank() == 2 && sv.cols() == 1));
  if (!ok) shape_mismatch("scale_rows", av.shape(), sv.shape());
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out = av;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) *= sv[i];
  const Var inputs[] = {a, s};
  return graph.record("scale_rows", inputs, std::move(out), [m, n](const Graph::BackwardContext& ctx) {
    const Tensor& x = *ctx.inputs[0];
    const Tensor& f = *ctx.inputs[1];
    const Tensor& g = ctx.grad_out;
    if (Tensor* ga = ctx.input_grads[0])
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*ga)(i, j) += g(i, j) * f[i];
    if (Tensor* gs = ctx.input_grads[1])
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g(i, j) * x(i, j);
        (*gs)[i] += acc;
      }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Graph& graph = parts.front().graph();
  const std::size_t m = parts.front().value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    same_graph(parts.front(), p);
    const Tensor& v = p.value();
    if (v.rank() != 2 || v.rows() != m) shape_mismatch("concat_cols", parts.front().shape(), v.shape());
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor out(Shape{m, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out(i, offset + j) = v(i, j);
    offset += widths[k];
  }
  return graph.record("concat_cols", parts, std::move(out), [m, widths](const Graph::BackwardContext& ctx) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (Tensor* gp = ctx.input_grads[k])
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) (*gp)(i, j) += ctx.grad_out(i, off + j);
      off += widths[k];
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (av.rank() != 2 || begin >= end || end > av.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for shape " + to_string(av.shape()));
  }
  const std::size_t m = av.rows(), w = end - begin;
  Tensor out(Shape{m, w});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = av(i, begin + j);
  const Var inputs[] = {a};
  return a.graph().record("slice_cols", inputs, std::move(out), [m, w, begin](const Graph::BackwardContext& ctx) {
    if (Tensor* ga = ctx.input_grads[0])
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) (*ga)(i, begin + j) += ctx.grad_out(i, j);
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const Var inputs[] = {a};
  return a.graph().record("reshape", inputs, std::move(out), [](const Graph::BackwardContext& ctx) {
    if (Tensor* ga = ctx.input_grads[0])
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += ctx.grad_out[i];
  });
}

Var softmax_rows(Var a) {
  const Tensor& av = a.value();
  if (av.rank() == 0 || av.shape().back() == 0) throw ShapeError("softmax_rows: empty last axis");
  const std::size_t n = av.shape().back();
  const std::size_t m = av.size() / n;
  Tensor out(av.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = av.data().data() + i * n;
    double* y = out.data().data() + i * n;
    const double top = *std::max_element(x, x + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += (y[j] = std::exp(x[j] - top));
    for (std::size_t j = 0; j < n; ++j) y[j] /= total;
  }
  const Var inputs[] = {a};
  return a.graph().record("softmax_rows", inputs, std::move(out), [m, n](const Graph::BackwardContext& ctx) {
    Tensor* ga = ctx.input_grads[0];
    if (!ga) return;
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = ctx.out.data().data() + i * n;
      const double* g = ctx.grad_out.data().data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += y[j] * (g[j] - dot);
    }
  });
}

Var exp(Var a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      a, "log", [](double x) { return std::log(std::max(x, kNormEpsilon)); },
      [](double x, double) { return x > kNormEpsilon ? 1.0 / x : 0.0; });
}

Var tanh(Var a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var square(Var a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var reciprocal(Var a) {
  return unary(a, "reciprocal", [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw ConfigError("clamp: lower bound exceeds upper bound");
  return unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var huber(Var r, double delta) {
  if (!(delta > 0.0)) throw ConfigError("huber: delta must be positive");
  return unary(
      r, "huber",
      [delta](double x) {
        const double ax = std::abs(x);
        return ax <= delta ? 0.5 * x * x : delta * (ax - 0.5 * delta);
      },
      [delta](double x, double) {
        if (std::abs(x) <= delta) return x;
        return x > 0.0 ? delta : -delta;
      });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const Var inputs[] = {a};
  return a.graph().record("sum", inputs, Tensor::scalar(total), [](const Graph::BackwardContext& ctx) {
    if (Tensor* ga = ctx.input_grads[0]) {
      const double g = ctx.grad_out[0];
      for (double& v : ga->data()) v += g;
    }
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var l2_normalize(Var a) {
  const Tensor& av = a.value();
  if (av.rank() == 0 || av.shape().back() == 0) throw ShapeError("l2_normalize: empty last axis");
  const std::size_t n = av.shape().back();
  const std::size_t m = av.size() / n;
  Tensor out(av.shape());
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += av[i * n + j] * av[i * n + j];
    norms[i] = std::sqrt(ss);
    const double denom = std::max(norms[i], kNormEpsilon);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] / denom;
  }
  const Var inputs[] = {a};
  return a.graph().record("l2_normalize", inputs, std::move(out),
                          [m, n, norms = std::move(norms)](const Graph::BackwardContext& ctx) {
    Tensor* ga = ctx.input_grads[0];
    if (!ga) return;
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = ctx.out.data().data() + i * n;
      const double* g = ctx.grad_out.data().data() + i * n;
      if (norms[i] > kNormEpsilon) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += y[j] * g[j];
        for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += (g[j] - y[j] * dot) / norms[i];
      } else {
        for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += g[j] / kNormEpsilon;
      }
    }
  });
}

Var batch_matvec(Var w, Var k) {
  Graph& graph = same_graph(w, k);
  const Tensor& wv = w.value();
  const Tensor& kv = k.value();
  if (wv.rank() != 2 || kv.rank() != 3 || kv.dim(0) != wv.dim(0) || kv.dim(1) != wv.dim(1)) {
    shape_mismatch("batch_matvec", wv.shape(), kv.shape());
  }
  const std::size_t b = kv.dim(0), nk = kv.dim(1), p = kv.dim(2);
  Tensor out(Shape{b, p});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < nk; ++j) {
      const double weight = wv[i * nk + j];
      const double* row = kv.data().data() + (i * nk + j) * p;
      for (std::size_t c = 0; c < p; ++c) out[i * p + c] += weight * row[c];
    }
  const Var inputs[] = {w, k};
  return graph.record("batch_matvec", inputs, std::move(out), [b, nk, p](const Graph::BackwardContext& ctx) {
    const Tensor& weights = *ctx.inputs[0];
    const Tensor& kernels = *ctx.inputs[1];
    const Tensor& g = ctx.grad_out;
    Tensor* gw = ctx.input_grads[0];
    Tensor* gk = ctx.input_grads[1];
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < nk; ++j) {
        const std::size_t base = (i * nk + j) * p;
        if (gw) {
          double dot = 0.0;
          for (std::size_t c = 0; c < p; ++c) dot += g[i * p + c] * kernels[base + c];
          (*gw)[i * nk + j] += dot;
        }
        if (gk) {
          const double weight = weights[i * nk + j];
          for (std::size_t c = 0; c < p; ++c) (*gk)[base + c] += weight * g[i * p + c];
        }
      }
  });
}

}  // namespace gka
