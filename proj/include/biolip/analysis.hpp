#pragma once

#include <string>
#include <utility>
#include <vector>

#include "biolip/dataset.hpp"
#include "biolip/error.hpp"
#include "biolip/evaluation.hpp"
#include "biolip/kinematics.hpp"
#include "biolip/region_map.hpp"
#include "biolip/trajectory.hpp"

// Real-vs-fake kinematic statistics over a labelled window set, and class-mean
// trajectory spectra.

namespace biolip {

struct LabelledGroups {
  std::vector<double> fake;
  std::vector<double> real;
};

/// Per-window mean of sigma^(order) over all landmarks and enabled axes.
inline LabelledGroups window_sigma_groups(const WindowSet& ws, int order) {
  const auto& cfg = ws.feature_config();
  const auto it = std::find(cfg.orders.begin(), cfg.orders.end(), order);
  if (it == cfg.orders.end()) throw Error(Errc::invalid_config, "order " + std::to_string(order) + " is not enabled");
  const auto slot = static_cast<std::size_t>(it - cfg.orders.begin());
  const auto width = static_cast<Eigen::Index>(cfg.axes.size() * kNumLandmarks);
  LabelledGroups g;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto& r = ws.ref(i);
    const Eigen::VectorXd s = kinematic_stats(ws.sequence(r.sequence), r.window, cfg);
    const double v = s.segment(static_cast<Eigen::Index>(slot) * width, width).mean();
    (ws.label(i) == 1 ? g.fake : g.real).push_back(v);
  }
  return g;
}

/// Per-window region mean of sigma^(0) on the y axis.
inline LabelledGroups region_sigma_groups(const WindowSet& ws, Region region) {
  FeatureConfig cfg;
  cfg.window_len = ws.feature_config().window_len;
  cfg.stride = ws.feature_config().stride;
  cfg.axes = {axis_y};
  cfg.orders = {0};
  const auto& rm = ws.region_map();
  LabelledGroups g;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto& r = ws.ref(i);
    const auto& seq = ws.sequence(r.sequence);
    const Eigen::VectorXd s = kinematic_stats(seq, r.window, cfg);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < seq.landmark_ids.size() && k < kNumLandmarks; ++k) {
      if (rm.region_of(seq.landmark_ids[k]) != region) continue;
      sum += s(static_cast<Eigen::Index>(k));
      ++n;
    }
    (ws.label(i) == 1 ? g.fake : g.real).push_back(n ? sum / static_cast<double>(n) : 0.0);
  }
  return g;
}

/// StatReports for every enabled order ("sigma_<k>") followed by every region
/// ("region_<name>").
inline std::vector<StatReport> kinematic_reports(const WindowSet& ws) {
  std::vector<StatReport> out;
  for (int k : ws.feature_config().orders) {
    auto g = window_sigma_groups(ws, k);
    out.push_back(compare_groups("sigma_" + std::to_string(k), g.fake, g.real));
  }
  for (int r = 0; r < 4; ++r) {
    auto g = region_sigma_groups(ws, static_cast<Region>(r));
    out.push_back(compare_groups(std::string("region_") + kRegionNames[static_cast<std::size_t>(r)], g.fake, g.real));
  }
  return out;
}

/// Mean over the 64 landmarks of the PSD of one axis, on frames [0, length).
inline Spectrum sequence_psd(const NormalizedSequence& seq, int axis, std::size_t length, double fs) {
  if (seq.frames.size() < length) throw Error(Errc::series_too_short, seq.video_id + " is shorter than the PSD length");
  Spectrum mean_spec;
  std::vector<double> series(length);
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    for (std::size_t t = 0; t < length; ++t) series[t] = seq.frames[t](static_cast<Eigen::Index>(i), axis);
    const Spectrum s = trajectory_psd(series, fs);
    if (mean_spec.power.empty()) {
      mean_spec = s;
    } else {
      for (std::size_t k = 0; k < s.power.size(); ++k) mean_spec.power[k] += s.power[k];
    }
  }
  for (auto& p : mean_spec.power) p /= static_cast<double>(kNumLandmarks);
  return mean_spec;
}

struct ClassSpectra {
  Spectrum fake;
  Spectrum real;
  std::size_t n_fake = 0, n_real = 0;
};

/// Class-mean spectra over sequences truncated to a common length (0 = the
/// shortest sequence). fs is the first sequence's fps.
inline ClassSpectra class_psd(const std::vector<NormalizedSequence>& seqs, int axis = axis_y, std::size_t length = 0) {
  if (seqs.empty()) throw Error(Errc::empty_video, "no sequences");
  if (length == 0) {
    length = seqs.front().frames.size();
    for (const auto& s : seqs) length = std::min(length, s.frames.size());
  }
  const double fs = seqs.front().fps;
  ClassSpectra out;
  auto accumulate = [](Spectrum& acc, const Spectrum& s) {
    if (acc.power.empty()) {
      acc = s;
      return;
    }
    for (std::size_t k = 0; k < s.power.size(); ++k) acc.power[k] += s.power[k];
  };
  for (const auto& seq : seqs) {
    const Spectrum s = sequence_psd(seq, axis, length, fs);
    if (seq.label.value_or(0) == 1) {
      accumulate(out.fake, s);
      ++out.n_fake;
    } else {
      accumulate(out.real, s);
      ++out.n_real;
    }
  }
  for (auto& p : out.fake.power) p /= static_cast<double>(std::max<std::size_t>(out.n_fake, 1));
  for (auto& p : out.real.power) p /= static_cast<double>(std::max<std::size_t>(out.n_real, 1));
  return out;
}

}  // namespace biolip
