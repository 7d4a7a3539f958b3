#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "biolip/dataset.hpp"
#include "biolip/error.hpp"
#include "biolip/evaluation.hpp"
#include "biolip/network.hpp"
#include "biolip/rng.hpp"

namespace biolip {

struct TrainConfig {
  double lr0 = 3e-4;
  double weight_decay = 1e-4;
  int epochs = 60;
  double lr_min = 1e-5;
  int patience = 30;
  std::size_t batch_size = 256;
  std::optional<double> pos_weight;  ///< nullopt = auto (negative / positive window ratio)
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (lr_min > lr0) throw Error(Errc::invalid_config, "lr_min must not exceed lr0");
    if (epochs < 1) throw Error(Errc::invalid_config, "epochs must be >= 1");
    if (patience < 1 || patience > epochs) throw Error(Errc::invalid_config, "patience must be in [1, epochs]");
    if (batch_size < 2) throw Error(Errc::invalid_config, "batch_size must be >= 2");
    if (pos_weight && !(*pos_weight > 0.0)) throw Error(Errc::invalid_config, "pos_weight must be > 0");
  }

  nlohmann::json to_json() const {
    return {{"lr0", lr0},
            {"weight_decay", weight_decay},
            {"epochs", epochs},
            {"lr_min", lr_min},
            {"patience", patience},
            {"batch_size", batch_size},
            {"pos_weight", pos_weight ? nlohmann::json(*pos_weight) : nlohmann::json("auto")},
            {"seed", seed},
            {"betas", {beta1, beta2}},
            {"eps", eps}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
      c.lr0 = j.value("lr0", c.lr0);
      c.weight_decay = j.value("weight_decay", c.weight_decay);
      c.epochs = j.value("epochs", c.epochs);
      c.lr_min = j.value("lr_min", c.lr_min);
      c.patience = j.value("patience", c.patience);
      c.batch_size = j.value("batch_size", c.batch_size);
      if (j.contains("pos_weight") && j["pos_weight"].is_number()) c.pos_weight = j["pos_weight"].get<double>();
      c.seed = j.value("seed", c.seed);
      if (j.contains("betas")) {
        c.beta1 = j["betas"].at(0).get<double>();
        c.beta2 = j["betas"].at(1).get<double>();
      }
      c.eps = j.value("eps", c.eps);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::invalid_config, std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
  }
};

namespace detail {

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace detail

struct LossResult {
  double loss = 0.0;
  Eigen::RowVectorXd grad;  ///< dLoss / dlogit
};

/// Mean of -[w y log s(z) + (1 - y) log(1 - s(z))] in softplus form.
inline LossResult weighted_bce_logits(const Eigen::RowVectorXd& logits, const Eigen::VectorXd& labels,
                                      double pos_weight) {
  if (logits.size() != labels.size() || logits.size() == 0)
    throw Error(Errc::shape_mismatch, "logits and labels differ in length");
  LossResult r;
  r.grad.resize(logits.size());
  const double n = static_cast<double>(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = logits(i), y = labels(i);
    r.loss += pos_weight * y * detail::softplus(-z) + (1.0 - y) * detail::softplus(z);
    const double s = sigmoid(z);
    r.grad(i) = (pos_weight * y * (s - 1.0) + (1.0 - y) * s) / n;
  }
  r.loss /= n;
  return r;
}

inline double auto_pos_weight(std::size_t negatives, std::size_t positives) {
  if (negatives == 0 || positives == 0) throw Error(Errc::single_class_dataset, "training windows hold one class");
  return static_cast<double>(negatives) / static_cast<double>(positives);
}

inline double auto_pos_weight(const WindowSet& windows) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) pos += windows.label(i) == 1 ? 1 : 0;
  return auto_pos_weight(windows.size() - pos, pos);
}

/// lr_min + (lr0 - lr_min) (1 + cos(pi e / epochs)) / 2
inline double cosine_lr(int epoch, const TrainConfig& cfg) {
  return cfg.lr_min +
         0.5 * (cfg.lr0 - cfg.lr_min) *
             (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(cfg.epochs)));
}

struct AdamState {
  std::vector<MatrixXd> m;
  std::vector<MatrixXd> v;

  static AdamState zeros_like(const ModelParams& p) {
    AdamState s;
    for (const auto& t : p.trainable) {
      s.m.push_back(MatrixXd::Zero(t.value.rows(), t.value.cols()));
      s.v.push_back(MatrixXd::Zero(t.value.rows(), t.value.cols()));
    }
    return s;
  }
};

/// One AdamW update: decoupled decay on weight tensors, then the bias-corrected adaptive step.
inline void adamw_step(ModelParams& params, const Gradients& grads, AdamState& state, double lr,
                       const TrainConfig& cfg) {
  if (grads.size() != params.trainable.size() || state.m.size() != params.trainable.size())
    throw Error(Errc::shape_mismatch, "gradient/optimizer state count differs from params");
  for (const auto& g : grads)
    if (!g.allFinite()) throw Error(Errc::non_finite_gradient, "gradient has non-finite entries");
  params.step += 1;
  const double t = static_cast<double>(params.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.trainable.size(); ++i) {
    auto& theta = params.trainable[i].value;
    const auto& g = grads[i];
    if (g.rows() != theta.rows() || g.cols() != theta.cols())
      throw Error(Errc::shape_mismatch, "gradient shape differs for " + params.trainable[i].name);
    if (params.trainable[i].decay && cfg.weight_decay != 0.0) theta *= (1.0 - lr * cfg.weight_decay);
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g.cwiseAbs2();
    theta.array() -= lr * (state.m[i].array() / bc1) / ((state.v[i].array() / bc2).sqrt() + cfg.eps);
  }
}

/// Eval-mode logits of every window, grouped per sequence.
inline std::vector<ScoredVideo> score_videos(const ModelConfig& mcfg, const ModelParams& params,
                                             const WindowSet& windows) {
  std::vector<ScoredVideo> out;
  for (std::size_t s = 0; s < windows.num_sequences(); ++s) {
    const auto [begin, end] = windows.sequence_range(s);
    if (begin == end) continue;
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const auto logits = predict(mcfg, params, windows.batch(idx));
    const auto& seq = windows.sequence(s);
    out.push_back(ScoredVideo::make(seq.video_id, std::vector<double>(logits.begin(), logits.end()),
                                    seq.label.value_or(0), seq.generator_tag));
  }
  return out;
}

inline double video_auc(const std::vector<ScoredVideo>& videos) {
  std::vector<double> s;
  std::vector<int> l;
  for (const auto& v : videos) {
    s.push_back(v.score);
    l.push_back(v.label);
  }
  return roc_auc(s, l);
}

struct TrainingState {
  AdamState adam;
  std::string rng_state;
  int epoch = 0;  ///< epochs completed
  double best_auc = -1.0;
  int best_epoch = 0;
};

struct EpochRecord {
  int epoch = 0;  ///< 1-based
  double loss = 0.0;
  double val_auc = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double pos_weight = 1.0;
};

struct TrainResult {
  ModelParams best;
  TrainingState best_state;
  TrainHistory history;
};

/// Seeded training with per-epoch cosine lr, validation video-AUC early stopping.
/// Returns the best-validation parameters (earlier epoch wins ties), never the last.
inline TrainResult train(const WindowSet& train_set, const WindowSet& val_set, const ModelConfig& mcfg,
                         const TrainConfig& tcfg, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  tcfg.validate();
  mcfg.validate();
  if (train_set.size() < 2) throw Error(Errc::single_class_dataset, "training set needs at least two windows");
  const double pos_weight = tcfg.pos_weight ? *tcfg.pos_weight : auto_pos_weight(train_set);
  {
    bool has_pos = false, has_neg = false;
    for (std::size_t s = 0; s < val_set.num_sequences(); ++s)
      (val_set.sequence(s).label.value_or(0) == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw Error(Errc::single_class_dataset, "validation split holds one class");
  }

  ModelParams params = init_params(mcfg, tcfg.seed);
  AdamState adam = AdamState::zeros_like(params);
  Rng rng(mix_seed(tcfg.seed, std::uint64_t{1}));

  TrainResult result;
  result.history.pos_weight = pos_weight;
  int since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int e = 0; e < tcfg.epochs; ++e) {
    const double lr = cosine_lr(e, tcfg);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += tcfg.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + tcfg.batch_size);
      if (hi - lo < 2) continue;  // batch norm needs two samples
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                         order.begin() + static_cast<std::ptrdiff_t>(hi));
      const Batch batch = train_set.batch(idx);
      LossResult loss;
      try {
        auto fwd = forward(mcfg, params, batch, {Mode::train}, &rng);
        loss = weighted_bce_logits(fwd.logits, batch.labels, pos_weight);
        if (!std::isfinite(loss.loss)) throw Error(Errc::diverged_training, "loss is not finite");
        const auto grads = backward(mcfg, params, fwd.cache, loss.grad);
        update_running_stats(mcfg, params, fwd.cache);
        adamw_step(params, grads, adam, lr, tcfg);
      } catch (const Error& err) {
        if (err.code() == Errc::non_finite_activation || err.code() == Errc::non_finite_gradient)
          throw Error(Errc::diverged_training, "epoch " + std::to_string(e + 1) + ": " + err.what());
        throw;
      }
      loss_sum += loss.loss * static_cast<double>(hi - lo);
      loss_count += hi - lo;
    }
    if (!params.all_finite()) throw Error(Errc::diverged_training, "parameters became non-finite");

    EpochRecord rec;
    rec.epoch = e + 1;
    rec.lr = lr;
    rec.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    rec.val_auc = video_auc(score_videos(mcfg, params, val_set));
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_auc > result.best_state.best_auc) {
      result.best = params;
      result.best_state.adam = adam;
      result.best_state.rng_state = rng_state(rng);
      result.best_state.epoch = rec.epoch;
      result.best_state.best_auc = rec.val_auc;
      result.best_state.best_epoch = rec.epoch;
      result.history.best_epoch = rec.epoch;
      since_best = 0;
    } else if (++since_best >= tcfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace biolip
