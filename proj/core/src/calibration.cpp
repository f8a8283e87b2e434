#include "gka/calibration.hpp"

#include <algorithm>

#include "gka/error.hpp"

namespace gka {

RngNoise::RngNoise(std::uint64_t seed) : mask_rng_(Rng::derive(seed, 1)), normal_rng_(Rng::derive(seed, 2)) {}

Tensor RngNoise::dropout_mask(std::span<const double> keep, std::size_t width) {
  Tensor mask(Shape{keep.size(), width});
  for (std::size_t i = 0; i < keep.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) mask(i, j) = mask_rng_.bernoulli(keep[i]);
  return mask;
}

Tensor RngNoise::standard_normal(std::size_t rows, std::size_t cols) {
  return normal_rng_.normal_tensor(Shape{rows, cols});
}

void FrozenNoise::freeze() {
  frozen_ = true;
  next_mask_ = 0;
  next_normal_ = 0;
}

Tensor FrozenNoise::dropout_mask(std::span<const double> keep, std::size_t width) {
  if (!frozen_) {
    masks_.push_back(inner_.dropout_mask(keep, width));
    return masks_.back();
  }
  if (next_mask_ >= masks_.size() || masks_[next_mask_].shape() != Shape{keep.size(), width}) {
    throw Error("frozen noise replay does not match the recorded mask draws");
  }
  return masks_[next_mask_++];
}

Tensor FrozenNoise::standard_normal(std::size_t rows, std::size_t cols) {
  if (!frozen_) {
    normals_.push_back(inner_.standard_normal(rows, cols));
    return normals_.back();
  }
  if (next_normal_ >= normals_.size() || normals_[next_normal_].shape() != Shape{rows, cols}) {
    throw Error("frozen noise replay does not match the recorded normal draws");
  }
  return normals_[next_normal_++];
}

CalibrationParams CalibrationParams::init(std::size_t features, Rng& rng, std::size_t hidden) {
  const std::size_t h = hidden > 0 ? hidden : std::max<std::size_t>(features, 8);
  CalibrationParams p;
  p.transform = Mlp2::glorot(features, h, features, rng);
  p.gate = Mlp2::glorot(features, h, 2, rng);
  return p;
}

namespace {

void require_noise(Mode mode, const NoiseSource* noise) {
  if (mode == Mode::train && noise == nullptr) throw ConfigError("train mode requires a noise source");
}

// lo + (hi - lo) * sigmoid(logit), as a (batch, 1) column.
Var squash(Var logits, std::size_t column, double lo, double hi) {
  return add_scalar(scale(sigmoid(slice_cols(logits, column, column + 1)), hi - lo), lo);
}

}  // namespace

CalibrationOutput self_calibrate(Binder& bind, Var z, const CalibrationParams& params, Mode mode,
                                 NoiseSource* noise) {
  require_noise(mode, noise);
  if (!(params.drop_lo >= 0.0 && params.drop_lo <= params.drop_hi && params.drop_hi < 1.0)) {
    throw ConfigError("dropout range must satisfy 0 <= lo <= hi < 1");
  }
  if (!(params.scale_lo <= params.scale_hi)) throw ConfigError("scale range must satisfy lo <= hi");

  Var gate = apply(bind, params.gate, z);
  Var drop = squash(gate, 0, params.drop_lo, params.drop_hi);
  Var gain = squash(gate, 1, params.scale_lo, params.scale_hi);
  Var transformed = apply(bind, params.transform, z);

  Var branch = transformed;
  Var factor = gain;
  if (mode == Mode::train) {
    const Tensor& d = drop.value();
    std::vector<double> keep(d.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = 1.0 - d[i];
    const std::size_t width = z.shape()[1];
    Var mask = bind.graph().constant(noise->dropout_mask(keep, width));
    branch = mul(transformed, mask);
    factor = mul(gain, reciprocal(add_scalar(scale(drop, -1.0), 1.0)));
  }
  Var out = add(z, scale_rows(branch, factor));
  return CalibrationOutput{out, drop, gain};
}

VariationalParams VariationalParams::init(std::size_t features, std::size_t latent, Rng& rng, std::size_t hidden) {
  if (features == 0 || latent == 0) throw ConfigError("variational block needs features >= 1 and latent >= 1");
  const std::size_t enc = (features + 1) / 2;
  const std::size_t h = hidden > 0 ? hidden : std::max<std::size_t>(features, 8);
  VariationalParams p;
  p.encoder = Affine::glorot(features, enc, rng);
  p.mean = Affine::glorot(enc, latent, rng);
  p.log_var = Affine::glorot(enc, latent, rng);
  p.decoder = Mlp2::glorot(latent, h, features, rng);
  return p;
}

VariationalOutput variational_encode_decode(Binder& bind, Var s, const VariationalParams& params, Mode mode,
                                            NoiseSource* noise) {
  require_noise(mode, noise);
  Var hidden = tanh(apply(bind, params.encoder, s));
  Var mu = apply(bind, params.mean, hidden);
  Var log_var = clamp(apply(bind, params.log_var, hidden), -kLogVarBound, kLogVarBound);
  Var latent = mu;
  if (mode == Mode::train) {
    const Shape& shape = mu.shape();
    Var eps = bind.graph().constant(noise->standard_normal(shape[0], shape[1]));
    latent = add(mu, mul(eps, exp(scale(log_var, 0.5))));
  }
  Var out = add(s, apply(bind, params.decoder, latent));
  return VariationalOutput{out, mu, log_var, latent};
}

Var kl_term(Var mean, Var log_var) {
  if (mean.shape() != log_var.shape() || mean.shape().size() != 2) {
    throw ShapeError("kl_term: shape mismatch " + to_string(mean.shape()) + " vs " + to_string(log_var.shape()));
  }
  const double rows = static_cast<double>(mean.shape()[0]);
  Var per_entry = add_scalar(sub(add(square(mean), exp(log_var)), log_var), -1.0);
  return scale(sum(per_entry), 0.5 / rows);
}

}  // namespace gka
