#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gka/layers.hpp"

namespace gka {

/// Half-open column interval [begin, end).
struct GroupRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t width() const { return end - begin; }
  friend bool operator==(const GroupRange&, const GroupRange&) = default;
};

/// Ordered partition of the feature columns [0, p) into contiguous groups.
class FeatureGroupSpec {
 public:
  FeatureGroupSpec() = default;
  /// Throws ConfigError unless the ranges are nonempty, sorted, contiguous,
  /// and start at column 0.
  explicit FeatureGroupSpec(std::vector<GroupRange> groups);

  static FeatureGroupSpec single(std::size_t features);
  /// `count` groups of near-equal width covering [0, features).
  static FeatureGroupSpec even(std::size_t features, std::size_t count);

  /// Throws ConfigError if the spec does not cover exactly [0, features).
  void require_covers(std::size_t features) const;

  std::size_t feature_count() const { return groups_.empty() ? 0 : groups_.back().end; }
  std::size_t size() const { return groups_.size(); }
  bool empty() const { return groups_.empty(); }
  const GroupRange& operator[](std::size_t g) const { return groups_[g]; }
  const std::vector<GroupRange>& ranges() const { return groups_; }
  auto begin() const { return groups_.begin(); }
  auto end() const { return groups_.end(); }

  friend bool operator==(const FeatureGroupSpec&, const FeatureGroupSpec&) = default;

 private:
  std::vector<GroupRange> groups_;
};

std::string to_string(const FeatureGroupSpec& spec);

/// Learnable maps of one adaptive kernel attention block over `width` inputs.
struct KernelAttentionParams {
  Mlp2 kernel;        // width -> kernels * width
  Mlp2 weight;        // width -> kernels
  Affine projection;  // width -> width, no nonlinearity

  /// Hidden layers use Glorot init with width max(p, 8) unless `hidden` > 0;
  /// the projection starts at zero so the block begins as the identity.
  static KernelAttentionParams init(std::size_t width, std::size_t kernels, Rng& rng, std::size_t hidden = 0);

  std::size_t width() const { return projection.in(); }
  std::size_t kernels() const { return weight.out(); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    kernel.visit(prefix + ".kernel", f);
    weight.visit(prefix + ".weight", f);
    projection.visit(prefix + ".projection", f);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    kernel.visit(prefix + ".kernel", f);
    weight.visit(prefix + ".weight", f);
    projection.visit(prefix + ".projection", f);
  }
};

struct AttentionTrace {
  Var output;   // Z: (batch, width)
  Var kernels;  // normalized kernels: (batch, k, width)
  Var weights;  // kernel weights: (batch, k)
};

/// Values of the kernels and kernel weights detached from their graph.
struct AttentionSnapshot {
  Tensor kernels;  // (n, k, width)
  Tensor weights;  // (n, k)

  static AttentionSnapshot of(const AttentionTrace& trace);
};

/// Generates k per-sample kernels, normalizes each to unit L2 norm, mixes
/// the kernel-modulated inputs with softmax weights, and adds the affine
/// projection of the mix back onto the input.
AttentionTrace kernel_attention_forward(Binder& bind, Var x, const KernelAttentionParams& params);

struct GroupedAttention {
  Var output;  // (batch, p), groups concatenated in spec order
  std::vector<AttentionTrace> traces;
};

/// Applies one attention block per group. `order` optionally permutes the
/// processing order; the output layout always follows the spec.
GroupedAttention grouped_attention_forward(Binder& bind, Var x, const FeatureGroupSpec& spec,
                                           std::span<const KernelAttentionParams> params,
                                           std::span<const std::size_t> order = {});

}  // namespace gka
