#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "biolip/biolip.hpp"

// Central finite-difference check of the full model gradient.

namespace biolip::test {

inline Batch random_batch(const ModelConfig& cfg, Index b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 2.0);
  Batch batch;
  batch.size = b;
  batch.window_len = cfg.window_len;
  batch.temporal.resize(cfg.input_dim, b * cfg.window_len);
  for (Index i = 0; i < batch.temporal.size(); ++i) batch.temporal.data()[i] = g(rng);
  batch.stats.resize(cfg.input_dim, b);
  for (Index i = 0; i < batch.stats.size(); ++i) batch.stats.data()[i] = u(rng);
  batch.regions.resize(cfg.region_in, b);
  for (Index i = 0; i < batch.regions.size(); ++i) batch.regions.data()[i] = u(rng);
  batch.labels.resize(b);
  for (Index i = 0; i < b; ++i) batch.labels(i) = static_cast<double>(i % 2);
  return batch;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  int checked = 0;
};

/// Floor on the relative-error denominator; gradients below it are compared absolutely.
inline constexpr double kGradCheckFloor = 1e-6;

/// Train-mode loss (weighted BCE, fixed dropout masks) against `samples` randomly
/// chosen parameter scalars: a uniformly chosen tensor, then a uniform element.
inline GradCheckResult gradient_check(const ModelConfig& cfg, const ModelParams& params, const Batch& batch,
                                      int samples, std::uint64_t seed, double step = 1e-4, double pos_weight = 1.3) {
  const std::uint64_t dropout_seed = seed ^ 0x9e3779b97f4a7c15ULL;
  auto loss_at = [&](const ModelParams& p) {
    Rng rng(dropout_seed);
    const auto f = forward(cfg, p, batch, {Mode::train}, &rng);
    return weighted_bce_logits(f.logits, batch.labels, pos_weight).loss;
  };
  Rng rng(dropout_seed);
  const auto f = forward(cfg, params, batch, {Mode::train}, &rng);
  const auto loss = weighted_bce_logits(f.logits, batch.labels, pos_weight);
  const Gradients g = backward(cfg, params, f.cache, loss.grad);

  std::mt19937_64 pick(seed);
  GradCheckResult r;
  ModelParams p = params;
  for (int s = 0; s < samples; ++s) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, p.trainable.size() - 1)(pick);
    auto& value = p.trainable[t].value;
    const auto k = std::uniform_int_distribution<Index>(0, value.size() - 1)(pick);
    const double orig = value.data()[k];
    value.data()[k] = orig + step;
    const double lp = loss_at(p);
    value.data()[k] = orig - step;
    const double lm = loss_at(p);
    value.data()[k] = orig;
    const double numeric = (lp - lm) / (2.0 * step);
    const double analytic = g[t].data()[k];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), kGradCheckFloor});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(numeric - analytic) / denom);
    ++r.checked;
  }
  return r;
}

/// Params with non-trivial batch-norm affine terms and running statistics.
inline ModelParams perturbed_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = init_params(cfg, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (auto& t : p.trainable)
    if (!t.decay)
      for (Index i = 0; i < t.value.size(); ++i) t.value.data()[i] += u(rng);
  for (auto& t : p.buffers)
    for (Index i = 0; i < t.value.size(); ++i) t.value.data()[i] += std::abs(u(rng));
  return p;
}

}  // namespace biolip::test
