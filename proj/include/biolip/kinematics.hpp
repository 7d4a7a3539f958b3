#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "biolip/binary_io.hpp"
#include "biolip/error.hpp"
#include "biolip/region_map.hpp"
#include "biolip/trajectory.hpp"

namespace biolip {

enum Axis : int { axis_x = 0, axis_y = 1, axis_z = 2 };

struct FeatureConfig {
  std::size_t window_len = 25;
  std::size_t stride = 5;
  /// Enabled coordinate axes, ascending.
  std::vector<int> axes = {axis_y};
  /// Enabled kinematic orders (0 displacement .. 3 jerk), ascending.
  std::vector<int> orders = {0, 1, 2, 3};

  std::size_t dim() const { return kNumLandmarks * axes.size() * orders.size(); }
  int max_order() const { return orders.empty() ? 0 : orders.back(); }

  void validate() const {
    if (stride < 1) throw Error(Errc::invalid_config, "stride must be >= 1");
    if (axes.empty()) throw Error(Errc::invalid_config, "axis mask is empty");
    if (orders.empty()) throw Error(Errc::invalid_config, "order mask is empty");
    if (!std::is_sorted(axes.begin(), axes.end()) ||
        std::adjacent_find(axes.begin(), axes.end()) != axes.end() || axes.front() < 0 || axes.back() > 2)
      throw Error(Errc::invalid_config, "axes must be a strictly ascending subset of {0,1,2}");
    if (!std::is_sorted(orders.begin(), orders.end()) ||
        std::adjacent_find(orders.begin(), orders.end()) != orders.end() || orders.front() < 0 ||
        orders.back() > 3)
      throw Error(Errc::invalid_config, "orders must be a strictly ascending subset of {0,1,2,3}");
    if (window_len < static_cast<std::size_t>(max_order()) + 1 || window_len < 2)
      throw Error(Errc::invalid_config, "window too short for the highest enabled order");
  }
};

/// Feature column for (order block, axis, landmark): order-major, then axis, then landmark.
inline std::size_t feature_column(const FeatureConfig& cfg, std::size_t order_slot, std::size_t axis_slot,
                                  std::size_t landmark) {
  return (order_slot * cfg.axes.size() + axis_slot) * kNumLandmarks + landmark;
}

struct Window {
  std::size_t start = 0;  ///< offset into NormalizedSequence::frames
  std::size_t length = 0;
};

inline constexpr std::size_t kRegionFeatures = 8;
using RegionVector = Eigen::Matrix<double, 8, 1>;

struct WindowFeatures {
  std::string video_id;
  std::size_t window_start = 0;
  Eigen::MatrixXd temporal;  ///< window_len x dim
  Eigen::VectorXd stats;     ///< dim, every entry >= 0
  RegionVector regions;
  std::optional<int> label;
};

/// Sliding windows that never span a gap in the retained frame indices.
/// For a gapless sequence of N frames: floor((N - len) / stride) + 1 windows.
inline std::vector<Window> windows(const NormalizedSequence& seq, const FeatureConfig& cfg) {
  cfg.validate();
  std::vector<Window> out;
  const std::size_t n = seq.frames.size();
  std::size_t run_start = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    const bool run_ends = k == n || (!seq.retained_indices.empty() &&
                                     seq.retained_indices[k] != seq.retained_indices[k - 1] + 1);
    if (!run_ends) continue;
    const std::size_t run_len = k - run_start;
    for (std::size_t s = 0; run_len >= cfg.window_len && s + cfg.window_len <= run_len; s += cfg.stride)
      out.push_back({run_start + s, cfg.window_len});
    run_start = k;
  }
  if (out.empty())
    throw Error(Errc::sequence_too_short, seq.video_id + " has no run of " + std::to_string(cfg.window_len) +
                                              " consecutive frames");
  return out;
}

/// Population standard deviation (divides by n). Values are taken relative to the
/// first sample, so a constant series gives exactly 0.
inline double population_std(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double ref = v[0];
  double mean = 0.0;
  for (double x : v) mean += x - ref;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - ref - mean) * (x - ref - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

/// In-place forward difference: v[t] <- v[t+1] - v[t], dropping the last element.
inline void forward_difference(std::vector<double>& v) {
  for (std::size_t t = 0; t + 1 < v.size(); ++t) v[t] = v[t + 1] - v[t];
  if (!v.empty()) v.pop_back();
}

namespace detail {

inline void window_series(const NormalizedSequence& seq, const Window& w, std::size_t landmark, int axis,
                          std::vector<double>& out) {
  out.resize(w.length);
  for (std::size_t t = 0; t < w.length; ++t)
    out[t] = seq.frames[w.start + t](static_cast<Eigen::Index>(landmark), axis);
}

inline void check_window(const NormalizedSequence& seq, const Window& w, const FeatureConfig& cfg) {
  if (w.length != cfg.window_len || w.start + w.length > seq.frames.size())
    throw Error(Errc::shape_mismatch, "window does not fit the sequence/config");
}

}  // namespace detail

/// sigma^(k) per landmark/axis/order, laid out as feature_column().
inline Eigen::VectorXd kinematic_stats(const NormalizedSequence& seq, const Window& w, const FeatureConfig& cfg) {
  detail::check_window(seq, w, cfg);
  Eigen::VectorXd out(static_cast<Eigen::Index>(cfg.dim()));
  std::vector<double> series;
  for (std::size_t a = 0; a < cfg.axes.size(); ++a) {
    for (std::size_t i = 0; i < kNumLandmarks; ++i) {
      detail::window_series(seq, w, i, cfg.axes[a], series);
      int current = 0;
      for (std::size_t o = 0; o < cfg.orders.size(); ++o) {
        while (current < cfg.orders[o]) {
          forward_difference(series);
          ++current;
        }
        out(static_cast<Eigen::Index>(feature_column(cfg, o, a, i))) = population_std(series);
      }
    }
  }
  return out;
}

/// Raw series and its differences, each difference front-padded with its first value.
inline Eigen::MatrixXd temporal_tensor(const NormalizedSequence& seq, const Window& w, const FeatureConfig& cfg) {
  detail::check_window(seq, w, cfg);
  const auto T = static_cast<Eigen::Index>(cfg.window_len);
  Eigen::MatrixXd out(T, static_cast<Eigen::Index>(cfg.dim()));
  std::vector<double> series;
  for (std::size_t a = 0; a < cfg.axes.size(); ++a) {
    for (std::size_t i = 0; i < kNumLandmarks; ++i) {
      detail::window_series(seq, w, i, cfg.axes[a], series);
      int current = 0;
      for (std::size_t o = 0; o < cfg.orders.size(); ++o) {
        while (current < cfg.orders[o]) {
          forward_difference(series);
          ++current;
        }
        const auto col = static_cast<Eigen::Index>(feature_column(cfg, o, a, i));
        const std::size_t pad = cfg.window_len - series.size();
        for (std::size_t t = 0; t < cfg.window_len; ++t)
          out(static_cast<Eigen::Index>(t), col) = series[t < pad ? 0 : t - pad];
      }
    }
  }
  return out;
}

inline constexpr double kRatioEpsilon = 1e-9;
inline constexpr double kRatioClamp = 1e6;

/// numerator / denominator with the frozen-mouth guard.
inline double guarded_ratio(double num, double den) {
  if (den < kRatioEpsilon) return num < kRatioEpsilon ? 1.0 : std::min(num / kRatioEpsilon, kRatioClamp);
  return num / den;
}

inline double guarded_normalized_difference(double a, double b) {
  const double sum = a + b;
  if (sum < kRatioEpsilon) return 0.0;
  return (a - b) / sum;
}

/// The 8 ratios from per-region mean displacement std (li, lo, up, pe order).
inline RegionVector region_ratio_vector(const std::array<double, 4>& r) {
  const double li = r[0], lo = r[1], up = r[2], pe = r[3];
  RegionVector x;
  x << guarded_ratio(li, up), guarded_ratio(lo, up), guarded_ratio(li, lo), guarded_ratio(pe, up),
      guarded_ratio(li, pe), li, up, guarded_normalized_difference(li, up);
  return x;
}

/// Mean y-axis displacement std per region, in Region enum order.
inline std::array<double, 4> region_means(const NormalizedSequence& seq, const Window& w, const RegionMap& rm) {
  std::array<double, 4> sum{};
  std::array<std::size_t, 4> count{};
  std::vector<double> series;
  for (std::size_t i = 0; i < seq.landmark_ids.size(); ++i) {
    auto region = rm.region_of(seq.landmark_ids[i]);
    if (!region) throw Error(Errc::shape_mismatch, "landmark not in region map");
    detail::window_series(seq, w, i, axis_y, series);
    const auto r = static_cast<std::size_t>(*region);
    sum[r] += population_std(series);
    ++count[r];
  }
  for (std::size_t r = 0; r < 4; ++r) sum[r] /= static_cast<double>(count[r]);
  return sum;
}

inline RegionVector region_ratios(const NormalizedSequence& seq, const Window& w, const RegionMap& rm) {
  if (w.start + w.length > seq.frames.size()) throw Error(Errc::shape_mismatch, "window out of range");
  return region_ratio_vector(region_means(seq, w, rm));
}

inline WindowFeatures extract_window(const NormalizedSequence& seq, const Window& w, const FeatureConfig& cfg,
                                     const RegionMap& rm) {
  WindowFeatures f;
  f.video_id = seq.video_id;
  f.window_start = w.start;
  f.temporal = temporal_tensor(seq, w, cfg);
  f.stats = kinematic_stats(seq, w, cfg);
  f.regions = region_ratios(seq, w, rm);
  f.label = seq.label;
  return f;
}

inline std::vector<WindowFeatures> extract_features(const NormalizedSequence& seq, const FeatureConfig& cfg,
                                                    const RegionMap& rm) {
  std::vector<WindowFeatures> out;
  for (const auto& w : windows(seq, cfg)) out.push_back(extract_window(seq, w, cfg, rm));
  return out;
}

// Feature cache: 16-byte header {"BLFC", u32 version, u32 window_len, u32 dim}, then
// one record per window of little-endian float32:
//   video_index, window_start, label (-1 if unknown), temporal (row-major), stats, regions.

inline constexpr std::uint32_t kFeatureCacheVersion = 1;


struct FeatureCacheRecord {
  std::uint32_t video_index = 0;
  WindowFeatures features;
};

inline void write_feature_cache_header(std::ostream& out, const FeatureConfig& cfg) {
  out.write("BLFC", 4);
  binary::put_u32(out, kFeatureCacheVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(cfg.window_len));
  binary::put_u32(out, static_cast<std::uint32_t>(cfg.dim()));
}

inline void write_feature_cache_record(std::ostream& out, std::uint32_t video_index, const WindowFeatures& f) {
  binary::put_f32(out, static_cast<float>(video_index));
  binary::put_f32(out, static_cast<float>(f.window_start));
  binary::put_f32(out, f.label ? static_cast<float>(*f.label) : -1.0f);
  for (Eigen::Index t = 0; t < f.temporal.rows(); ++t)
    for (Eigen::Index c = 0; c < f.temporal.cols(); ++c) binary::put_f32(out, static_cast<float>(f.temporal(t, c)));
  for (Eigen::Index c = 0; c < f.stats.size(); ++c) binary::put_f32(out, static_cast<float>(f.stats(c)));
  for (Eigen::Index c = 0; c < f.regions.size(); ++c) binary::put_f32(out, static_cast<float>(f.regions(c)));
}

inline std::vector<FeatureCacheRecord> read_feature_cache(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "BLFC") throw Error(Errc::io_failure, "not a feature cache");
  if (binary::get_u32(in) != kFeatureCacheVersion) throw Error(Errc::io_failure, "unsupported cache version");
  const auto T = static_cast<Eigen::Index>(binary::get_u32(in));
  const auto D = static_cast<Eigen::Index>(binary::get_u32(in));
  std::vector<FeatureCacheRecord> out;
  while (in.peek() != std::char_traits<char>::eof()) {
    FeatureCacheRecord r;
    r.video_index = static_cast<std::uint32_t>(binary::get_f32(in));
    r.features.window_start = static_cast<std::size_t>(binary::get_f32(in));
    const float label = binary::get_f32(in);
    if (label >= 0.0f) r.features.label = static_cast<int>(label);
    r.features.temporal.resize(T, D);
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index c = 0; c < D; ++c) r.features.temporal(t, c) = binary::get_f32(in);
    r.features.stats.resize(D);
    for (Eigen::Index c = 0; c < D; ++c) r.features.stats(c) = binary::get_f32(in);
    for (Eigen::Index c = 0; c < 8; ++c) r.features.regions(c) = binary::get_f32(in);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace biolip
