#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "biolip/error.hpp"
#include "biolip/kinematics.hpp"
#include "biolip/layers.hpp"
#include "biolip/rng.hpp"

namespace biolip {

using Eigen::Index;
using Eigen::MatrixXd;

struct BranchEnable {
  bool temporal = true;
  bool region = true;
  bool stat = true;
};

/// Widths of the three-branch classifier. Defaults give the 302,145-parameter model.
struct ModelConfig {
  Index window_len = 25;
  Index input_dim = 256;
  std::vector<Index> conv_channels = {128, 128, 64};
  Index kernel = 3;
  Index pool_segments = 4;
  Index temporal_out = 128;
  Index region_in = 8;
  Index region_hidden = 32;
  Index region_out = 32;
  Index stat_hidden = 128;
  Index stat_out = 64;
  std::vector<Index> head_hidden = {128, 64};
  double dropout = 0.2;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  BranchEnable branches;

  static ModelConfig for_features(const FeatureConfig& f) {
    ModelConfig c;
    c.window_len = static_cast<Index>(f.window_len);
    c.input_dim = static_cast<Index>(f.dim());
    return c;
  }

  /// Disabled branches contribute a zero block, so the fused width is fixed.
  Index fusion_width() const { return temporal_out + region_out + stat_out; }
  Index pooled_width() const { return conv_channels.back() * (2 + pool_segments); }

  void validate() const {
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::invalid_config, "dropout must be in [0, 1)");
    if (conv_channels.empty() || kernel < 1 || kernel % 2 == 0)
      throw Error(Errc::invalid_config, "conv stack needs an odd kernel and at least one layer");
    if (window_len < pool_segments) throw Error(Errc::invalid_config, "window shorter than pooling segments");
    if (!branches.temporal && !branches.region && !branches.stat)
      throw Error(Errc::invalid_config, "at least one branch must be enabled");
  }

  nlohmann::json to_json() const {
    return {{"window_len", window_len},       {"input_dim", input_dim},
            {"conv_channels", conv_channels}, {"kernel", kernel},
            {"pool_segments", pool_segments}, {"temporal_out", temporal_out},
            {"region_in", region_in},         {"region_hidden", region_hidden},
            {"region_out", region_out},       {"stat_hidden", stat_hidden},
            {"stat_out", stat_out},           {"head_hidden", head_hidden},
            {"dropout", dropout},             {"bn_momentum", bn_momentum},
            {"bn_eps", bn_eps},
            {"branches", {{"temporal", branches.temporal}, {"region", branches.region}, {"stat", branches.stat}}}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("window_len", c.window_len);
    get("input_dim", c.input_dim);
    get("conv_channels", c.conv_channels);
    get("kernel", c.kernel);
    get("pool_segments", c.pool_segments);
    get("temporal_out", c.temporal_out);
    get("region_in", c.region_in);
    get("region_hidden", c.region_hidden);
    get("region_out", c.region_out);
    get("stat_hidden", c.stat_hidden);
    get("stat_out", c.stat_out);
    get("head_hidden", c.head_hidden);
    get("dropout", c.dropout);
    get("bn_momentum", c.bn_momentum);
    get("bn_eps", c.bn_eps);
    if (j.contains("branches")) {
      const auto& b = j.at("branches");
      c.branches.temporal = b.value("temporal", true);
      c.branches.region = b.value("region", true);
      c.branches.stat = b.value("stat", true);
    }
    c.validate();
    return c;
  }
};

struct Tensor {
  std::string name;
  MatrixXd value;
  bool decay = false;  ///< subject to weight decay (weights only)
};

struct ModelParams {
  std::vector<Tensor> trainable;
  std::vector<Tensor> buffers;  ///< batch-norm running statistics
  std::int64_t step = 0;        ///< optimizer updates applied so far

  const MatrixXd& operator[](const std::string& name) const { return find(name).value; }
  MatrixXd& operator[](const std::string& name) { return find(name).value; }

  Index trainable_count() const {
    Index n = 0;
    for (const auto& t : trainable) n += t.value.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& t : trainable)
      if (!t.value.allFinite()) return false;
    for (const auto& t : buffers)
      if (!t.value.allFinite()) return false;
    return true;
  }

  Tensor& find(const std::string& name) { return const_cast<Tensor&>(std::as_const(*this).find(name)); }

  const Tensor& find(const std::string& name) const {
    for (const auto& t : trainable)
      if (t.name == name) return t;
    for (const auto& t : buffers)
      if (t.name == name) return t;
    throw Error(Errc::shape_mismatch, "no parameter named " + name);
  }

  bool has(const std::string& name) const {
    for (const auto& t : trainable)
      if (t.name == name) return true;
    for (const auto& t : buffers)
      if (t.name == name) return true;
    return false;
  }
};

/// One gradient matrix per trainable tensor, in ModelParams::trainable order.
using Gradients = std::vector<MatrixXd>;

namespace detail {

inline void add_linear(ModelParams& p, const std::string& name, Index out, Index in) {
  p.trainable.push_back({name + ".weight", MatrixXd::Zero(out, in), true});
  p.trainable.push_back({name + ".bias", MatrixXd::Zero(out, 1), false});
}

inline void add_batch_norm(ModelParams& p, const std::string& name, Index channels) {
  p.trainable.push_back({name + ".gamma", MatrixXd::Ones(channels, 1), false});
  p.trainable.push_back({name + ".beta", MatrixXd::Zero(channels, 1), false});
  p.buffers.push_back({name + ".running_mean", MatrixXd::Zero(channels, 1), false});
  p.buffers.push_back({name + ".running_var", MatrixXd::Ones(channels, 1), false});
}

inline std::string conv_name(std::size_t l) { return "temporal.conv" + std::to_string(l + 1); }
inline std::string conv_bn_name(std::size_t l) { return "temporal.bn" + std::to_string(l + 1); }
inline std::string head_name(std::size_t l) { return "head.fc" + std::to_string(l + 1); }

}  // namespace detail

/// Allocates all tensors with zero weights, zero biases, unit BN scale.
inline ModelParams make_params(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  if (cfg.branches.temporal) {
    Index in = cfg.input_dim;
    for (std::size_t l = 0; l < cfg.conv_channels.size(); ++l) {
      detail::add_linear(p, detail::conv_name(l), cfg.conv_channels[l], cfg.kernel * in);
      detail::add_batch_norm(p, detail::conv_bn_name(l), cfg.conv_channels[l]);
      in = cfg.conv_channels[l];
    }
    detail::add_linear(p, "temporal.proj", cfg.temporal_out, cfg.pooled_width());
  }
  if (cfg.branches.region) {
    detail::add_linear(p, "region.fc1", cfg.region_hidden, cfg.region_in);
    detail::add_linear(p, "region.fc2", cfg.region_out, cfg.region_hidden);
  }
  if (cfg.branches.stat) {
    detail::add_linear(p, "stat.fc1", cfg.stat_hidden, cfg.input_dim);
    detail::add_batch_norm(p, "stat.bn1", cfg.stat_hidden);
    detail::add_linear(p, "stat.fc2", cfg.stat_out, cfg.stat_hidden);
  }
  Index in = cfg.fusion_width();
  for (std::size_t l = 0; l < cfg.head_hidden.size(); ++l) {
    detail::add_linear(p, detail::head_name(l), cfg.head_hidden[l], in);
    in = cfg.head_hidden[l];
  }
  detail::add_linear(p, detail::head_name(cfg.head_hidden.size()), 1, in);
  return p;
}

/// Kaiming-uniform (fan-in, gain sqrt 2) weights, zero biases, BN scale 1 / offset 0.
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = make_params(cfg);
  Rng rng(seed);
  for (auto& t : p.trainable) {
    if (!t.decay) continue;
    const double bound = std::sqrt(6.0 / static_cast<double>(t.value.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Index j = 0; j < t.value.cols(); ++j)
      for (Index i = 0; i < t.value.rows(); ++i) t.value(i, j) = u(rng);
  }
  return p;
}

/// Network inputs for B windows, feature-major.
struct Batch {
  Index size = 0;
  Index window_len = 0;
  MatrixXd temporal;  ///< input_dim x (B * window_len), column b * T + t
  MatrixXd stats;     ///< input_dim x B
  MatrixXd regions;   ///< 8 x B
  Eigen::VectorXd labels;

  template <class WindowRange>
  static Batch from_windows(const WindowRange& windows) {
    Batch b;
    b.size = static_cast<Index>(std::size(windows));
    if (b.size == 0) throw Error(Errc::shape_mismatch, "empty batch");
    const auto& first = *std::begin(windows);
    b.window_len = first.temporal.rows();
    const Index dim = first.temporal.cols();
    b.temporal.resize(dim, b.size * b.window_len);
    b.stats.resize(dim, b.size);
    b.regions.resize(kRegionFeatures, b.size);
    b.labels.resize(b.size);
    Index k = 0;
    for (const WindowFeatures& w : windows) {
      if (w.temporal.rows() != b.window_len || w.temporal.cols() != dim || w.stats.size() != dim)
        throw Error(Errc::shape_mismatch, "windows in a batch differ in shape");
      b.temporal.middleCols(k * b.window_len, b.window_len) = w.temporal.transpose();
      b.stats.col(k) = w.stats;
      b.regions.col(k) = w.regions;
      b.labels(k) = w.label.value_or(0);
      ++k;
    }
    return b;
  }

  Batch sample(Index b) const {
    Batch out;
    out.size = 1;
    out.window_len = window_len;
    out.temporal = temporal.middleCols(b * window_len, window_len);
    out.stats = stats.col(b);
    out.regions = regions.col(b);
    out.labels = labels.segment(b, 1);
    return out;
  }
};

enum class Mode { train, eval };

struct ForwardOptions {
  Mode mode = Mode::eval;
  /// Train-mode forward that normalizes with running statistics instead of batch statistics.
  bool freeze_batch_norm = false;
};

/// Activations retained for the backward pass.
struct ForwardCache {
  Mode mode = Mode::eval;
  bool frozen_batch_norm = false;
  std::int64_t param_step = -1;
  Index batch = 0;

  std::vector<MatrixXd> conv_cols;   ///< im2col input per conv layer
  std::vector<MatrixXd> conv_pre;    ///< BN output (GELU input) per conv layer
  std::vector<layers::BatchNormCache> conv_bn;
  layers::PoolCache pool;
  MatrixXd pooled;

  MatrixXd region_in, region_pre, region_act;

  MatrixXd stat_in, stat_pre, stat_act;
  layers::BatchNormCache stat_bn;

  std::vector<MatrixXd> head_in;    ///< input to each head linear (after dropout)
  std::vector<MatrixXd> head_mask;  ///< dropout mask applied before each head linear
  std::vector<MatrixXd> head_pre;   ///< pre-activation of each hidden head layer
};

struct ForwardResult {
  Eigen::RowVectorXd logits;
  ForwardCache cache;
};

namespace detail {

inline void check_batch(const ModelConfig& cfg, const Batch& batch) {
  if (batch.window_len != cfg.window_len || batch.temporal.rows() != cfg.input_dim ||
      batch.temporal.cols() != batch.size * batch.window_len || batch.stats.rows() != cfg.input_dim ||
      batch.stats.cols() != batch.size || batch.regions.rows() != cfg.region_in || batch.regions.cols() != batch.size)
    throw Error(Errc::shape_mismatch, "batch shape does not match model config");
}

inline MatrixXd norm_layer(const ModelParams& p, const std::string& name, const MatrixXd& x, bool use_batch,
                           double eps, layers::BatchNormCache& cache) {
  if (use_batch) return layers::batch_norm_train(x, p[name + ".gamma"], p[name + ".beta"], eps, cache);
  const MatrixXd& rm = p[name + ".running_mean"];
  const MatrixXd& rv = p[name + ".running_var"];
  // Record the frozen normalization so backward can treat it as affine.
  cache.inv_std = (rv.col(0).array() + eps).rsqrt().matrix();
  cache.batch_mean = rm.col(0);
  cache.batch_var = rv.col(0);
  cache.xhat = cache.inv_std.asDiagonal() * (x.colwise() - rm.col(0));
  return layers::batch_norm_eval(x, p[name + ".gamma"], p[name + ".beta"], rm, rv, eps);
}

inline ForwardResult forward_impl(const ModelConfig& cfg, const ModelParams& p, const Batch& batch,
                                  const ForwardOptions& opt, Rng* rng) {
  const bool train = opt.mode == Mode::train;
  const bool batch_stats = train && !opt.freeze_batch_norm;
  const Index B = batch.size;
  const Index T = batch.window_len;
  ForwardResult r;
  auto& c = r.cache;
  c.mode = opt.mode;
  c.frozen_batch_norm = opt.freeze_batch_norm;
  c.param_step = p.step;
  c.batch = B;

  MatrixXd fused = MatrixXd::Zero(cfg.fusion_width(), B);

  if (cfg.branches.temporal) {
    MatrixXd x = batch.temporal;
    const auto L = cfg.conv_channels.size();
    c.conv_cols.resize(L);
    c.conv_pre.resize(L);
    c.conv_bn.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      c.conv_cols[l] = layers::im2col(x, B, T, cfg.kernel);
      const std::string conv = conv_name(l);
      MatrixXd z = layers::linear(p[conv + ".weight"], p[conv + ".bias"], c.conv_cols[l]);
      c.conv_pre[l] = norm_layer(p, conv_bn_name(l), z, batch_stats, cfg.bn_eps, c.conv_bn[l]);
      x = layers::gelu(c.conv_pre[l]);
    }
    c.pooled = layers::multiscale_pool(x, B, T, cfg.pool_segments, c.pool);
    fused.topRows(cfg.temporal_out) = layers::linear(p["temporal.proj.weight"], p["temporal.proj.bias"], c.pooled);
  }

  if (cfg.branches.region) {
    c.region_in = batch.regions;
    c.region_pre = layers::linear(p["region.fc1.weight"], p["region.fc1.bias"], c.region_in);
    c.region_act = layers::gelu(c.region_pre);
    fused.middleRows(cfg.temporal_out, cfg.region_out) =
        layers::linear(p["region.fc2.weight"], p["region.fc2.bias"], c.region_act);
  }

  if (cfg.branches.stat) {
    c.stat_in = batch.stats;
    MatrixXd z = layers::linear(p["stat.fc1.weight"], p["stat.fc1.bias"], c.stat_in);
    c.stat_pre = norm_layer(p, "stat.bn1", z, batch_stats, cfg.bn_eps, c.stat_bn);
    c.stat_act = layers::gelu(c.stat_pre);
    fused.bottomRows(cfg.stat_out) = layers::linear(p["stat.fc2.weight"], p["stat.fc2.bias"], c.stat_act);
  }

  const std::size_t H = cfg.head_hidden.size();
  c.head_in.resize(H + 1);
  c.head_mask.resize(H + 1);
  c.head_pre.resize(H);
  MatrixXd h = std::move(fused);
  for (std::size_t l = 0; l <= H; ++l) {
    if (train && cfg.dropout > 0.0) {
      if (rng == nullptr) throw Error(Errc::invalid_config, "train-mode forward needs an rng");
      c.head_mask[l] = layers::dropout_mask(h.rows(), h.cols(), cfg.dropout, *rng);
      h = h.cwiseProduct(c.head_mask[l]);
    }
    c.head_in[l] = h;
    const std::string name = head_name(l);
    MatrixXd z = layers::linear(p[name + ".weight"], p[name + ".bias"], h);
    if (l < H) {
      c.head_pre[l] = z;
      h = layers::gelu(z);
    } else {
      r.logits = z.row(0);
    }
  }
  if (!r.logits.allFinite()) throw Error(Errc::non_finite_activation, "non-finite logit");
  return r;
}

}  // namespace detail

/// Forward pass. Eval mode evaluates every sample on its own, so a sample's logit is
/// bit-identical regardless of the batch it arrives in. Train mode requires B >= 2
/// unless batch norm is frozen.
inline ForwardResult forward(const ModelConfig& cfg, const ModelParams& params, const Batch& batch,
                             const ForwardOptions& opt = {}, Rng* rng = nullptr) {
  detail::check_batch(cfg, batch);
  if (opt.mode == Mode::train) {
    if (batch.size < 2 && !opt.freeze_batch_norm)
      throw Error(Errc::shape_mismatch, "train-mode batch norm needs at least two samples");
    return detail::forward_impl(cfg, params, batch, opt, rng);
  }
  if (batch.size == 1) return detail::forward_impl(cfg, params, batch, opt, rng);
  ForwardResult out;
  out.logits.resize(batch.size);
  out.cache.mode = Mode::eval;
  out.cache.param_step = params.step;
  out.cache.batch = batch.size;
  for (Index b = 0; b < batch.size; ++b) {
    out.logits(b) = detail::forward_impl(cfg, params, batch.sample(b), opt, rng).logits(0);
  }
  return out;
}

/// Eval-mode logits only.
inline Eigen::RowVectorXd predict(const ModelConfig& cfg, const ModelParams& params, const Batch& batch) {
  return forward(cfg, params, batch).logits;
}

/// Exact gradients of a loss with respect to every trainable tensor, given dL/dlogit.
inline Gradients backward(const ModelConfig& cfg, const ModelParams& p, const ForwardCache& c,
                          const Eigen::RowVectorXd& dlogits) {
  if (c.mode != Mode::train || c.param_step != p.step)
    throw Error(Errc::stale_cache, "backward needs the cache of a train-mode forward on the current params");
  if (dlogits.size() != c.batch) throw Error(Errc::shape_mismatch, "loss gradient size differs from batch");

  Gradients g(p.trainable.size());
  auto set = [&](const std::string& name, MatrixXd value) {
    for (std::size_t i = 0; i < p.trainable.size(); ++i) {
      if (p.trainable[i].name == name) {
        g[i] = std::move(value);
        return;
      }
    }
    throw Error(Errc::shape_mismatch, "no parameter named " + name);
  };
  auto bn_backward = [&](const std::string& name, const layers::BatchNormCache& bc, const MatrixXd& dy) {
    if (c.frozen_batch_norm) {
      layers::BatchNormGrads gr;
      gr.dgamma = dy.cwiseProduct(bc.xhat).rowwise().sum();
      gr.dbeta = dy.rowwise().sum();
      gr.dx = (p[name + ".gamma"].col(0).cwiseProduct(bc.inv_std)).asDiagonal() * dy;
      set(name + ".gamma", gr.dgamma);
      set(name + ".beta", gr.dbeta);
      return gr.dx;
    }
    auto gr = layers::batch_norm_backward(p[name + ".gamma"], bc, dy);
    set(name + ".gamma", gr.dgamma);
    set(name + ".beta", gr.dbeta);
    return gr.dx;
  };

  const std::size_t H = cfg.head_hidden.size();
  MatrixXd dh = dlogits;
  for (std::size_t l = H + 1; l-- > 0;) {
    const std::string name = detail::head_name(l);
    if (l < H) dh = layers::gelu_backward(c.head_pre[l], dh);
    auto lg = layers::linear_backward(p[name + ".weight"], c.head_in[l], dh);
    set(name + ".weight", std::move(lg.dw));
    set(name + ".bias", std::move(lg.db));
    dh = std::move(lg.dx);
    if (c.head_mask[l].size() != 0) dh = dh.cwiseProduct(c.head_mask[l]);
  }
  const MatrixXd& dfused = dh;

  if (cfg.branches.stat) {
    auto fc2 = layers::linear_backward(p["stat.fc2.weight"], c.stat_act, dfused.bottomRows(cfg.stat_out));
    set("stat.fc2.weight", std::move(fc2.dw));
    set("stat.fc2.bias", std::move(fc2.db));
    MatrixXd dz = bn_backward("stat.bn1", c.stat_bn, layers::gelu_backward(c.stat_pre, fc2.dx));
    auto fc1 = layers::linear_backward(p["stat.fc1.weight"], c.stat_in, dz, false);
    set("stat.fc1.weight", std::move(fc1.dw));
    set("stat.fc1.bias", std::move(fc1.db));
  }

  if (cfg.branches.region) {
    auto fc2 = layers::linear_backward(p["region.fc2.weight"], c.region_act,
                                       dfused.middleRows(cfg.temporal_out, cfg.region_out));
    set("region.fc2.weight", std::move(fc2.dw));
    set("region.fc2.bias", std::move(fc2.db));
    auto fc1 = layers::linear_backward(p["region.fc1.weight"], c.region_in,
                                       layers::gelu_backward(c.region_pre, fc2.dx), false);
    set("region.fc1.weight", std::move(fc1.dw));
    set("region.fc1.bias", std::move(fc1.db));
  }

  if (cfg.branches.temporal) {
    const Index B = c.batch;
    const Index T = cfg.window_len;
    auto proj = layers::linear_backward(p["temporal.proj.weight"], c.pooled, dfused.topRows(cfg.temporal_out));
    set("temporal.proj.weight", std::move(proj.dw));
    set("temporal.proj.bias", std::move(proj.db));
    MatrixXd dx = layers::multiscale_pool_backward(proj.dx, cfg.conv_channels.back(), B, T, cfg.pool_segments, c.pool);
    for (std::size_t l = cfg.conv_channels.size(); l-- > 0;) {
      const std::string conv = detail::conv_name(l);
      MatrixXd dz = bn_backward(detail::conv_bn_name(l), c.conv_bn[l], layers::gelu_backward(c.conv_pre[l], dx));
      auto lg = layers::linear_backward(p[conv + ".weight"], c.conv_cols[l], dz, l > 0);
      set(conv + ".weight", std::move(lg.dw));
      set(conv + ".bias", std::move(lg.db));
      if (l > 0) {
        const Index in_channels = cfg.conv_channels[l - 1];
        dx = layers::col2im(lg.dx, in_channels, B, T, cfg.kernel);
      }
    }
  }
  return g;
}

/// Folds the batch statistics of a train-mode forward into the running estimates.
inline void update_running_stats(const ModelConfig& cfg, ModelParams& p, const ForwardCache& c) {
  if (c.mode != Mode::train || c.frozen_batch_norm) return;
  if (cfg.branches.temporal) {
    for (std::size_t l = 0; l < cfg.conv_channels.size(); ++l) {
      const std::string name = detail::conv_bn_name(l);
      layers::update_running_stats(p[name + ".running_mean"], p[name + ".running_var"], c.conv_bn[l],
                                   cfg.bn_momentum, c.batch * cfg.window_len);
    }
  }
  if (cfg.branches.stat)
    layers::update_running_stats(p["stat.bn1.running_mean"], p["stat.bn1.running_var"], c.stat_bn, cfg.bn_momentum,
                                 c.batch);
}

}  // namespace biolip
