#include "gka/kernel_attention.hpp"

#include <algorithm>

#include "gka/error.hpp"

namespace gka {

FeatureGroupSpec::FeatureGroupSpec(std::vector<GroupRange> groups) : groups_(std::move(groups)) {
  if (groups_.empty()) throw ConfigError("feature group spec is empty");
  std::size_t expected = 0;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const GroupRange& r = groups_[g];
    if (r.begin != expected) {
      throw ConfigError("feature groups must be contiguous from column 0: group " + std::to_string(g) +
                        " starts at " + std::to_string(r.begin) + ", expected " + std::to_string(expected));
    }
    if (r.end <= r.begin) throw ConfigError("feature group " + std::to_string(g) + " is empty");
    expected = r.end;
  }
}

FeatureGroupSpec FeatureGroupSpec::single(std::size_t features) {
  return FeatureGroupSpec({GroupRange{0, features}});
}

FeatureGroupSpec FeatureGroupSpec::even(std::size_t features, std::size_t count) {
  if (count == 0 || count > features) throw ConfigError("cannot split " + std::to_string(features) +
                                                        " features into " + std::to_string(count) + " groups");
  std::vector<GroupRange> groups;
  std::size_t begin = 0;
  for (std::size_t g = 0; g < count; ++g) {
    const std::size_t width = features / count + (g < features % count ? 1 : 0);
    groups.push_back({begin, begin + width});
    begin += width;
  }
  return FeatureGroupSpec(std::move(groups));
}

void FeatureGroupSpec::require_covers(std::size_t features) const {
  if (groups_.empty() || feature_count() != features) {
    throw ConfigError("feature groups " + to_string(*this) + " do not partition [0, " + std::to_string(features) + ")");
  }
}

std::string to_string(const FeatureGroupSpec& spec) {
  std::string out = "[";
  for (std::size_t g = 0; g < spec.size(); ++g) {
    if (g > 0) out += ", ";
    out += "[" + std::to_string(spec[g].begin) + ", " + std::to_string(spec[g].end) + ")";
  }
  return out + "]";
}

KernelAttentionParams KernelAttentionParams::init(std::size_t width, std::size_t kernels, Rng& rng,
                                                  std::size_t hidden) {
  if (width == 0 || kernels == 0) throw ConfigError("attention block needs width >= 1 and kernels >= 1");
  const std::size_t h = hidden > 0 ? hidden : std::max<std::size_t>(width, 8);
  KernelAttentionParams p;
  p.kernel = Mlp2::glorot(width, h, kernels * width, rng);
  p.weight = Mlp2::glorot(width, h, kernels, rng);
  p.projection = Affine::zeros(width, width);
  return p;
}

AttentionSnapshot AttentionSnapshot::of(const AttentionTrace& trace) {
  return AttentionSnapshot{trace.kernels.value(), trace.weights.value()};
}

AttentionTrace kernel_attention_forward(Binder& bind, Var x, const KernelAttentionParams& params) {
  const Shape& shape = x.shape();
  const std::size_t width = params.width();
  if (shape.size() != 2 || shape[1] != width) {
    throw ShapeError("attention input " + to_string(shape) + " does not match block width " + std::to_string(width));
  }
  const std::size_t batch = shape[0];
  const std::size_t k = params.kernels();

  Var raw = apply(bind, params.kernel, x);
  Var unit = l2_normalize(reshape(raw, Shape{batch * k, width}));
  Var kernels = reshape(unit, Shape{batch, k, width});
  Var weights = softmax_rows(apply(bind, params.weight, x));
  // sum_j w_j (x * K_j) == x * (sum_j w_j K_j)
  Var mixed = mul(x, batch_matvec(weights, kernels));
  Var output = add(apply(bind, params.projection, mixed), x);
  return AttentionTrace{output, kernels, weights};
}

GroupedAttention grouped_attention_forward(Binder& bind, Var x, const FeatureGroupSpec& spec,
                                           std::span<const KernelAttentionParams> params,
                                           std::span<const std::size_t> order) {
  if (x.shape().size() != 2) throw ShapeError("grouped attention input must be a matrix, got " + to_string(x.shape()));
  spec.require_covers(x.shape()[1]);
  if (params.size() != spec.size()) {
    throw ConfigError("expected " + std::to_string(spec.size()) + " group attention blocks, got " +
                      std::to_string(params.size()));
  }
  std::vector<std::size_t> sequence(spec.size());
  if (order.empty()) {
    for (std::size_t g = 0; g < sequence.size(); ++g) sequence[g] = g;
  } else {
    std::vector<std::size_t> sorted(order.begin(), order.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t g = 0; g < sorted.size(); ++g) {
      if (sorted.size() != spec.size() || sorted[g] != g) throw ConfigError("group order is not a permutation");
    }
    sequence.assign(order.begin(), order.end());
  }

  GroupedAttention result;
  result.traces.resize(spec.size());
  for (std::size_t g : sequence) {
    Var slice = slice_cols(x, spec[g].begin, spec[g].end);
    result.traces[g] = kernel_attention_forward(bind, slice, params[g]);
  }
  std::vector<Var> outputs;
  outputs.reserve(spec.size());
  for (const AttentionTrace& t : result.traces) outputs.push_back(t.output);
  result.output = outputs.size() == 1 ? outputs.front() : concat_cols(outputs);
  return result;
}

}  // namespace gka
