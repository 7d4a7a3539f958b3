#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biolip/error.hpp"
#include "biolip/region_map.hpp"
#include "biolip/rng.hpp"
#include "biolip/trajectory.hpp"

// Ground-truth oracle sequences. "Real" motion is a chain of minimum-jerk
// point-to-point movements of a mouth-opening signal, shared by all landmarks
// with per-landmark gain and phase. "Fake" motion adds per-frame coordinate
// jitter on top. Output is already in normalized coordinates: the commissures
// sit at (-0.5, 0, 0) and (0.5, 0, 0) in every frame.

namespace biolip {

enum class JitterMode { white, smoothed };

struct SynthConfig {
  std::size_t n_frames = 100;
  double fps = 25.0;
  /// Movements per sequence; 0 draws durations until the sequence is covered.
  std::size_t n_segments = 0;
  double amplitude_min = 0.02;
  double amplitude_max = 0.12;
  std::size_t duration_min = 6;
  std::size_t duration_max = 14;
  /// Probability that a movement returns the mouth to rest instead of a new target.
  double rest_probability = 0.3;
  double jitter_sigma = 0.01;
  JitterMode jitter_mode = JitterMode::white;
  /// One-pole low-pass coefficient for JitterMode::smoothed: e[t] = a e[t-1] + (1 - a) w[t].
  double smoothing = 0.8;
  std::vector<int> jitter_axes = {0, 1, 2};
  /// Gain per region (lower_inner, lower_outer, upper, perioral).
  std::array<double, 4> region_gain = {1.0, 0.9, 0.5, 0.35};
  double gain_spread = 0.2;       ///< per-landmark gain in [1 - s, 1 + s]
  double phase_spread = 1.0;      ///< per-landmark time shift in frames, [-p, p]
  double lateral_fraction = 0.2;  ///< x amplitude relative to y
  double depth_fraction = 0.1;    ///< z amplitude relative to y
  std::uint64_t seed = 42;

  void validate() const {
    if (n_frames < 4) throw Error(Errc::invalid_config, "n_frames must be >= 4");
    if (!(fps > 0.0)) throw Error(Errc::invalid_config, "fps must be > 0");
    if (duration_min < 4 || duration_max < duration_min)
      throw Error(Errc::invalid_config, "segment durations must be >= 4 frames and ordered");
    if (!(amplitude_min > 0.0) || amplitude_max < amplitude_min)
      throw Error(Errc::invalid_config, "amplitudes must be > 0 and ordered");
    if (!(jitter_sigma >= 0.0)) throw Error(Errc::invalid_config, "jitter_sigma must be >= 0");
    if (!(smoothing >= 0.0 && smoothing < 1.0)) throw Error(Errc::invalid_config, "smoothing must be in [0, 1)");
  }

  nlohmann::json to_json() const {
    return {{"n_frames", n_frames},
            {"fps", fps},
            {"n_segments", n_segments},
            {"amplitude", {amplitude_min, amplitude_max}},
            {"duration", {duration_min, duration_max}},
            {"rest_probability", rest_probability},
            {"jitter_sigma", jitter_sigma},
            {"jitter_mode", jitter_mode == JitterMode::white ? "white" : "smoothed"},
            {"smoothing", smoothing},
            {"jitter_axes", jitter_axes},
            {"region_gain", region_gain},
            {"gain_spread", gain_spread},
            {"phase_spread", phase_spread},
            {"lateral_fraction", lateral_fraction},
            {"depth_fraction", depth_fraction},
            {"seed", seed}};
  }

  static SynthConfig from_json(const nlohmann::json& j) {
    SynthConfig c;
    try {
      c.n_frames = j.value("n_frames", c.n_frames);
      c.fps = j.value("fps", c.fps);
      c.n_segments = j.value("n_segments", c.n_segments);
      if (j.contains("amplitude")) {
        c.amplitude_min = j["amplitude"].at(0).get<double>();
        c.amplitude_max = j["amplitude"].at(1).get<double>();
      }
      if (j.contains("duration")) {
        c.duration_min = j["duration"].at(0).get<std::size_t>();
        c.duration_max = j["duration"].at(1).get<std::size_t>();
      }
      c.rest_probability = j.value("rest_probability", c.rest_probability);
      c.jitter_sigma = j.value("jitter_sigma", c.jitter_sigma);
      if (j.contains("jitter_mode")) {
        const auto mode = j["jitter_mode"].get<std::string>();
        if (mode != "white" && mode != "smoothed") throw Error(Errc::invalid_config, "jitter_mode: " + mode);
        c.jitter_mode = mode == "white" ? JitterMode::white : JitterMode::smoothed;
      }
      c.smoothing = j.value("smoothing", c.smoothing);
      if (j.contains("jitter_axes")) c.jitter_axes = j["jitter_axes"].get<std::vector<int>>();
      if (j.contains("region_gain")) c.region_gain = j["region_gain"].get<std::array<double, 4>>();
      c.gain_spread = j.value("gain_spread", c.gain_spread);
      c.phase_spread = j.value("phase_spread", c.phase_spread);
      c.lateral_fraction = j.value("lateral_fraction", c.lateral_fraction);
      c.depth_fraction = j.value("depth_fraction", c.depth_fraction);
      c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::invalid_config, std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
  }
};

/// Minimum-jerk position profile on tau in [0, 1].
inline double min_jerk(double tau) {
  tau = std::clamp(tau, 0.0, 1.0);
  const double t3 = tau * tau * tau;
  return t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

/// Piecewise minimum-jerk movement chain, evaluated at continuous time (frames).
class MovementChain {
 public:
  struct Segment {
    double start;
    double duration;
    double from;
    double delta;
  };

  void add(double duration, double target) {
    const double start = segments_.empty() ? origin_ : segments_.back().start + segments_.back().duration;
    const double from = segments_.empty() ? 0.0 : segments_.back().from + segments_.back().delta;
    segments_.push_back({start, duration, from, target - from});
  }

  void set_origin(double t) { origin_ = t; }
  double end() const { return segments_.empty() ? origin_ : segments_.back().start + segments_.back().duration; }
  const std::vector<Segment>& segments() const { return segments_; }

  double operator()(double t) const {
    if (segments_.empty()) return 0.0;
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const Segment& s) { return v < s.start; });
    const Segment& s = it == segments_.begin() ? segments_.front() : *std::prev(it);
    return s.from + s.delta * min_jerk((t - s.start) / s.duration);
  }

 private:
  double origin_ = 0.0;
  std::vector<Segment> segments_;
};

namespace detail {

inline Vec3 base_position(Region r, std::size_t k, std::size_t count) {
  const double u = count > 1 ? static_cast<double>(k) / static_cast<double>(count - 1) : 0.5;
  const double x = -0.45 + 0.9 * u;
  switch (r) {
    case Region::lower_inner: return {x * 0.8, 0.03 + 0.05 * std::sin(u * 3.14159), 0.0};
    case Region::lower_outer: return {x, 0.08 + 0.1 * std::sin(u * 3.14159), 0.01};
    case Region::upper: return {x, -0.05 - 0.08 * std::sin(u * 3.14159), 0.01};
    case Region::perioral: return {x * 1.3, (k % 2 == 0 ? 0.3 : -0.3), 0.03};
  }
  return {0.0, 0.0, 0.0};
}

inline double motion_sign(Region r, std::size_t k) {
  switch (r) {
    case Region::lower_inner:
    case Region::lower_outer: return 1.0;
    case Region::upper: return -1.0;
    case Region::perioral: return k % 2 == 0 ? 1.0 : -1.0;
  }
  return 1.0;
}

inline std::string synth_id(int label, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%s_%04zu", label ? "fake" : "real", index);
  return buf;
}

}  // namespace detail

/// A chain of movements covering [-margin, n_frames + margin].
inline MovementChain make_movement_chain(const SynthConfig& cfg, Rng& rng) {
  std::uniform_int_distribution<std::size_t> dur(cfg.duration_min, cfg.duration_max);
  std::uniform_real_distribution<double> amp(cfg.amplitude_min, cfg.amplitude_max);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MovementChain chain;
  const double margin = cfg.phase_spread + 1.0;
  chain.set_origin(-margin);
  const double horizon = static_cast<double>(cfg.n_frames) + margin;
  if (cfg.n_segments > 0) {
    // Durations are rescaled so that exactly n_segments movements cover the horizon.
    std::vector<double> d(cfg.n_segments);
    double total = 0.0;
    for (auto& x : d) total += (x = static_cast<double>(dur(rng)));
    for (auto& x : d) x *= (horizon + margin) / total;
    for (double x : d) chain.add(x, u(rng) < cfg.rest_probability ? 0.0 : amp(rng));
    return chain;
  }
  while (chain.end() < horizon) chain.add(static_cast<double>(dur(rng)), u(rng) < cfg.rest_probability ? 0.0 : amp(rng));
  return chain;
}

/// Smooth (label 0) sequence. Rows follow rm.all_ids().
inline NormalizedSequence gen_smooth(const SynthConfig& cfg, std::uint64_t seed,
                                     const RegionMap& rm = RegionMap::default_map()) {
  cfg.validate();
  Rng rng(seed);
  const MovementChain chain = make_movement_chain(cfg, rng);

  NormalizedSequence seq;
  seq.video_id = "synth";
  seq.fps = cfg.fps;
  seq.label = 0;
  seq.generator_tag = "synth_smooth";
  seq.landmark_ids = rm.all_ids();
  seq.commissure_ids = rm.commissure_ids();

  struct Landmark {
    Vec3 base;
    double gain;
    double phase;
    double sign;
    bool fixed;
  };
  std::vector<Landmark> marks;
  std::uniform_real_distribution<double> gain(1.0 - cfg.gain_spread, 1.0 + cfg.gain_spread);
  std::uniform_real_distribution<double> phase(-cfg.phase_spread, cfg.phase_spread);
  for (int r = 0; r < 4; ++r) {
    const auto& ids = rm.ids(static_cast<Region>(r));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Landmark m{detail::base_position(static_cast<Region>(r), k, ids.size()),
                 cfg.region_gain[static_cast<std::size_t>(r)] * gain(rng), phase(rng),
                 detail::motion_sign(static_cast<Region>(r), k), false};
      if (ids[k] == rm.commissure_ids().first || ids[k] == rm.commissure_ids().second) {
        m.base = {ids[k] == rm.commissure_ids().first ? -0.5 : 0.5, 0.0, 0.0};
        m.fixed = true;
      }
      marks.push_back(m);
    }
  }

  const std::array<Vec3, 2> corners = {Vec3{-0.5, 0.0, 0.0}, Vec3{0.5, 0.0, 0.0}};
  for (std::size_t t = 0; t < cfg.n_frames; ++t) {
    FrameMatrix f;
    for (std::size_t i = 0; i < marks.size(); ++i) {
      const auto& m = marks[i];
      const double o = m.fixed ? 0.0 : m.gain * chain(static_cast<double>(t) - m.phase);
      const auto row = static_cast<Eigen::Index>(i);
      f(row, 0) = m.base[0] + cfg.lateral_fraction * o * (m.base[0] < 0 ? -1.0 : 1.0);
      f(row, 1) = m.base[1] + m.sign * o;
      f(row, 2) = m.base[2] + cfg.depth_fraction * o;
    }
    seq.frames.push_back(f);
    seq.commissures.push_back(corners);
    seq.retained_indices.push_back(static_cast<std::int64_t>(t));
  }
  return seq;
}

/// Jitter sequence for one landmark/axis (white or one-pole smoothed).
inline std::vector<double> jitter_series(std::size_t n, const SynthConfig& cfg, Rng& rng) {
  std::normal_distribution<double> noise(0.0, cfg.jitter_sigma);
  std::vector<double> e(n);
  if (cfg.jitter_mode == JitterMode::white) {
    for (auto& x : e) x = noise(rng);
    return e;
  }
  double state = noise(rng);
  for (auto& x : e) {
    state = cfg.smoothing * state + (1.0 - cfg.smoothing) * noise(rng);
    x = state;
  }
  return e;
}

/// gen_smooth(cfg, seed) plus per-frame coordinate jitter (label 1). Commissure rows stay fixed.
inline NormalizedSequence gen_jittery(const SynthConfig& cfg, std::uint64_t seed,
                                      const RegionMap& rm = RegionMap::default_map()) {
  NormalizedSequence seq = gen_smooth(cfg, seed, rm);
  seq.label = 1;
  seq.generator_tag = cfg.jitter_mode == JitterMode::white ? "synth_jitter" : "synth_jitter_smoothed";
  if (cfg.jitter_sigma == 0.0) return seq;
  Rng rng(mix_seed(seed, std::uint64_t{0x6a697474}));
  for (std::size_t i = 0; i < seq.landmark_ids.size(); ++i) {
    const int id = seq.landmark_ids[i];
    if (id == seq.commissure_ids.first || id == seq.commissure_ids.second) continue;
    for (int a : cfg.jitter_axes) {
      const auto e = jitter_series(seq.frames.size(), cfg, rng);
      for (std::size_t t = 0; t < seq.frames.size(); ++t) seq.frames[t](static_cast<Eigen::Index>(i), a) += e[t];
    }
  }
  return seq;
}

/// n_real smooth and n_fake jittery sequences with disjoint per-sequence seeds.
inline std::vector<NormalizedSequence> gen_sequences(const SynthConfig& cfg, std::size_t n_real, std::size_t n_fake,
                                                     std::uint64_t seed,
                                                     const RegionMap& rm = RegionMap::default_map()) {
  if (n_real == 0 || n_fake == 0) throw Error(Errc::invalid_config, "need at least one sequence per class");
  std::vector<NormalizedSequence> out;
  for (std::size_t i = 0; i < n_real; ++i) {
    auto s = gen_smooth(cfg, mix_seed(seed, 2 * static_cast<std::uint64_t>(i)), rm);
    s.video_id = detail::synth_id(0, i);
    out.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < n_fake; ++i) {
    auto s = gen_jittery(cfg, mix_seed(seed, 2 * static_cast<std::uint64_t>(i) + 1), rm);
    s.video_id = detail::synth_id(1, i);
    out.push_back(std::move(s));
  }
  return out;
}

/// Writes one Landmark JSONL file per sequence; returns the written paths.
inline std::vector<std::filesystem::path> gen_dataset(const SynthConfig& cfg, std::size_t n_real, std::size_t n_fake,
                                                      std::uint64_t seed, const std::filesystem::path& dir,
                                                      const RegionMap& rm = RegionMap::default_map()) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_failure, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> paths;
  for (const auto& s : gen_sequences(cfg, n_real, n_fake, seed, rm)) {
    const auto path = dir / (s.video_id + ".jsonl");
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw Error(Errc::io_failure, "cannot write " + tmp);
      write_trajectory_file(out, to_trajectory(s));
      if (!out) throw Error(Errc::io_failure, "write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace biolip
