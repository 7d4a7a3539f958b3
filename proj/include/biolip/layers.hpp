#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "biolip/error.hpp"

// Building blocks of the classifier. Activations are stored feature-major:
// a (features x columns) matrix where each column is one sample, or one
// (sample, time step) pair for the temporal branch (column = b * T + t).

namespace biolip::layers {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd linear(const MatrixXd& w, const MatrixXd& b, const MatrixXd& x) {
  MatrixXd y = w * x;
  y.colwise() += b.col(0);
  return y;
}

struct LinearGrads {
  MatrixXd dw, db, dx;
};

inline LinearGrads linear_backward(const MatrixXd& w, const MatrixXd& x, const MatrixXd& dy, bool need_dx = true) {
  LinearGrads g;
  g.dw = dy * x.transpose();
  g.db = dy.rowwise().sum();
  if (need_dx) g.dx = w.transpose() * dy;
  return g;
}

// GELU, exact (erf) form.

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * (0.5 * std::numbers::sqrt2))); }

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * (0.5 * std::numbers::sqrt2)));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return cdf + x * pdf;
}

inline MatrixXd gelu(const MatrixXd& x) { return x.unaryExpr([](double v) { return gelu(v); }); }

inline MatrixXd gelu_backward(const MatrixXd& pre, const MatrixXd& dy) {
  return dy.cwiseProduct(pre.unaryExpr([](double v) { return gelu_grad(v); }));
}

// Batch normalization over the columns of a (channels x N) matrix.

struct BatchNormCache {
  MatrixXd xhat;
  VectorXd inv_std;
  VectorXd batch_mean;
  VectorXd batch_var;  ///< biased
};

inline MatrixXd batch_norm_train(const MatrixXd& x, const MatrixXd& gamma, const MatrixXd& beta, double eps,
                                 BatchNormCache& cache) {
  const auto n = static_cast<double>(x.cols());
  cache.batch_mean = x.rowwise().sum() / n;
  MatrixXd centered = x.colwise() - cache.batch_mean;
  cache.batch_var = centered.cwiseAbs2().rowwise().sum() / n;
  cache.inv_std = (cache.batch_var.array() + eps).rsqrt().matrix();
  cache.xhat = cache.inv_std.asDiagonal() * centered;
  MatrixXd y = gamma.col(0).asDiagonal() * cache.xhat;
  y.colwise() += beta.col(0);
  return y;
}

inline MatrixXd batch_norm_eval(const MatrixXd& x, const MatrixXd& gamma, const MatrixXd& beta,
                                const MatrixXd& running_mean, const MatrixXd& running_var, double eps) {
  const VectorXd scale = gamma.col(0).array() * (running_var.col(0).array() + eps).rsqrt();
  const VectorXd shift = beta.col(0).array() - running_mean.col(0).array() * scale.array();
  MatrixXd y = scale.asDiagonal() * x;
  y.colwise() += shift;
  return y;
}

struct BatchNormGrads {
  MatrixXd dgamma, dbeta, dx;
};

inline BatchNormGrads batch_norm_backward(const MatrixXd& gamma, const BatchNormCache& cache, const MatrixXd& dy) {
  BatchNormGrads g;
  const auto n = static_cast<double>(dy.cols());
  g.dgamma = dy.cwiseProduct(cache.xhat).rowwise().sum();
  g.dbeta = dy.rowwise().sum();
  const MatrixXd dxhat = gamma.col(0).asDiagonal() * dy;
  const VectorXd sum_dxhat = dxhat.rowwise().sum();
  const VectorXd sum_dxhat_xhat = dxhat.cwiseProduct(cache.xhat).rowwise().sum();
  g.dx.resize(dy.rows(), dy.cols());
  for (Index c = 0; c < dy.rows(); ++c) {
    g.dx.row(c) = (cache.inv_std(c) / n) *
                  (n * dxhat.row(c).array() - sum_dxhat(c) - cache.xhat.row(c).array() * sum_dxhat_xhat(c)).matrix();
  }
  return g;
}

/// running <- (1 - m) running + m batch; variance uses the unbiased batch estimate.
inline void update_running_stats(MatrixXd& running_mean, MatrixXd& running_var, const BatchNormCache& cache,
                                 double momentum, Index n) {
  const double unbias = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
  running_mean.col(0) = (1.0 - momentum) * running_mean.col(0) + momentum * cache.batch_mean;
  running_var.col(0) = (1.0 - momentum) * running_var.col(0) + momentum * unbias * cache.batch_var;
}

// Inverted dropout: kept entries are scaled by 1 / (1 - rate).

template <class Rng>
MatrixXd dropout_mask(Index rows, Index cols, double rate, Rng& rng) {
  MatrixXd mask(rows, cols);
  if (rate <= 0.0) {
    mask.setOnes();
    return mask;
  }
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) mask(i, j) = keep(rng) ? scale : 0.0;
  return mask;
}

// 1-D convolution, stride 1, symmetric zero padding (kernel - 1) / 2.
// Weight layout: (out_channels x kernel * in_channels), column k * in_channels + c.

inline MatrixXd im2col(const MatrixXd& x, Index batch, Index length, Index kernel) {
  const Index channels = x.rows();
  const Index pad = (kernel - 1) / 2;
  MatrixXd cols = MatrixXd::Zero(kernel * channels, batch * length);
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < length; ++t) {
      for (Index k = 0; k < kernel; ++k) {
        const Index s = t + k - pad;
        if (s < 0 || s >= length) continue;
        cols.block(k * channels, b * length + t, channels, 1) = x.col(b * length + s);
      }
    }
  }
  return cols;
}

inline MatrixXd col2im(const MatrixXd& dcols, Index channels, Index batch, Index length, Index kernel) {
  const Index pad = (kernel - 1) / 2;
  MatrixXd dx = MatrixXd::Zero(channels, batch * length);
  for (Index b = 0; b < batch; ++b) {
    for (Index t = 0; t < length; ++t) {
      for (Index k = 0; k < kernel; ++k) {
        const Index s = t + k - pad;
        if (s < 0 || s >= length) continue;
        dx.col(b * length + s) += dcols.block(k * channels, b * length + t, channels, 1);
      }
    }
  }
  return dx;
}

/// Adaptive partition: segment j covers [floor(j T / S), floor((j + 1) T / S)).
inline std::vector<std::pair<Index, Index>> segment_bounds(Index length, Index segments) {
  if (length < segments) throw Error(Errc::shape_mismatch, "sequence shorter than the number of pooling segments");
  std::vector<std::pair<Index, Index>> out;
  for (Index j = 0; j < segments; ++j) out.emplace_back(j * length / segments, (j + 1) * length / segments);
  return out;
}

/// Per-segment means of a (channels x length) feature map; column j is segment j.
inline MatrixXd local_segment_pool(const MatrixXd& map, Index segments) {
  const auto bounds = segment_bounds(map.cols(), segments);
  MatrixXd out(map.rows(), segments);
  for (Index j = 0; j < segments; ++j) {
    const auto [lo, hi] = bounds[static_cast<std::size_t>(j)];
    out.col(j) = map.middleCols(lo, hi - lo).rowwise().mean();
  }
  return out;
}

struct PoolCache {
  std::vector<Index> argmax;  ///< per (sample, channel): time index of the max
};

/// Multi-scale pooling of (channels x batch * length) into (channels * (2 + segments) x batch):
/// [global mean | segment 0 .. segment S-1 means | global max].
inline MatrixXd multiscale_pool(const MatrixXd& x, Index batch, Index length, Index segments, PoolCache& cache) {
  const Index channels = x.rows();
  const auto bounds = segment_bounds(length, segments);
  MatrixXd out(channels * (2 + segments), batch);
  cache.argmax.assign(static_cast<std::size_t>(batch * channels), 0);
  for (Index b = 0; b < batch; ++b) {
    const auto map = x.middleCols(b * length, length);
    out.block(0, b, channels, 1) = map.rowwise().mean();
    for (Index j = 0; j < segments; ++j) {
      const auto [lo, hi] = bounds[static_cast<std::size_t>(j)];
      out.block(channels * (1 + j), b, channels, 1) = map.middleCols(lo, hi - lo).rowwise().mean();
    }
    for (Index c = 0; c < channels; ++c) {
      Index arg = 0;
      const double m = map.row(c).maxCoeff(&arg);
      out(channels * (1 + segments) + c, b) = m;
      cache.argmax[static_cast<std::size_t>(b * channels + c)] = arg;
    }
  }
  return out;
}

inline MatrixXd multiscale_pool_backward(const MatrixXd& dy, Index channels, Index batch, Index length,
                                         Index segments, const PoolCache& cache) {
  const auto bounds = segment_bounds(length, segments);
  MatrixXd dx = MatrixXd::Zero(channels, batch * length);
  for (Index b = 0; b < batch; ++b) {
    auto map = dx.middleCols(b * length, length);
    map.colwise() += dy.col(b).head(channels) / static_cast<double>(length);
    for (Index j = 0; j < segments; ++j) {
      const auto [lo, hi] = bounds[static_cast<std::size_t>(j)];
      map.middleCols(lo, hi - lo).colwise() +=
          dy.col(b).segment(channels * (1 + j), channels) / static_cast<double>(hi - lo);
    }
    for (Index c = 0; c < channels; ++c)
      map(c, cache.argmax[static_cast<std::size_t>(b * channels + c)]) += dy(channels * (1 + segments) + c, b);
  }
  return dx;
}

}  // namespace biolip::layers
