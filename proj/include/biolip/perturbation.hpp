#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biolip/error.hpp"
#include "biolip/rng.hpp"
#include "biolip/trajectory.hpp"

// Landmark-level robustness perturbations on normalized sequences. Each sequence
// draws from its own generator seeded with mix_seed(seed, video_id).

namespace biolip {

/// Adds i.i.d. N(0, sigma^2) to every coordinate of the enabled axes of the 64
/// landmarks. The commissure reference positions are left untouched.
inline NormalizedSequence inject_noise(const NormalizedSequence& seq, double sigma, std::uint64_t seed,
                                       const std::vector<int>& axes = {0, 1, 2}) {
  if (!(sigma >= 0.0)) throw Error(Errc::invalid_config, "sigma must be >= 0");
  NormalizedSequence out = seq;
  if (sigma == 0.0) return out;
  Rng rng(mix_seed(seed, seq.video_id));
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& f : out.frames)
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (int a : axes) f(i, a) += noise(rng);
  return out;
}

enum class DropMode { hold_last, remove };

/// Drops each frame after the first with probability `rate`. hold_last repeats the
/// previous surviving frame (decoder freeze); remove deletes it and renumbers the
/// retained indices so the remaining frames are contiguous.
inline NormalizedSequence drop_frames(const NormalizedSequence& seq, double rate, DropMode mode, std::uint64_t seed) {
  if (rate == 1.0) throw Error(Errc::degenerate_rate, "frame drop rate 1 removes every frame");
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(Errc::invalid_config, "frame drop rate must be in [0, 1)");
  NormalizedSequence out = seq;
  if (rate == 0.0 || seq.frames.empty()) return out;
  Rng rng(mix_seed(seed, seq.video_id));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<bool> dropped(seq.frames.size(), false);
  for (std::size_t t = 1; t < seq.frames.size(); ++t) dropped[t] = u(rng) < rate;

  if (mode == DropMode::hold_last) {
    for (std::size_t t = 1; t < out.frames.size(); ++t) {
      if (!dropped[t]) continue;
      out.frames[t] = out.frames[t - 1];
      out.commissures[t] = out.commissures[t - 1];
    }
    return out;
  }
  out.frames.clear();
  out.commissures.clear();
  out.retained_indices.clear();
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    if (dropped[t]) continue;
    out.frames.push_back(seq.frames[t]);
    out.commissures.push_back(seq.commissures[t]);
    out.retained_indices.push_back(seq.retained_indices.front() + static_cast<std::int64_t>(out.frames.size() - 1));
  }
  return out;
}

struct PerturbSpec {
  enum class Kind { noise, frame_drop } kind = Kind::noise;
  double sigma = 0.0;
  double rate = 0.0;
  DropMode drop_mode = DropMode::hold_last;
  std::uint64_t seed = 42;

  void validate() const {
    if (kind == Kind::noise && rate != 0.0) throw Error(Errc::invalid_config, "noise perturbation takes no rate");
    if (kind == Kind::frame_drop && sigma != 0.0) throw Error(Errc::invalid_config, "frame drop takes no sigma");
    if (!(sigma >= 0.0)) throw Error(Errc::invalid_config, "sigma must be >= 0");
    if (!(rate >= 0.0 && rate <= 1.0)) throw Error(Errc::invalid_config, "rate must be in [0, 1]");
  }

  nlohmann::json provenance() const {
    if (kind == Kind::noise) return {{"kind", "noise"}, {"sigma", sigma}, {"seed", seed}};
    return {{"kind", "frame_drop"},
            {"rate", rate},
            {"drop_mode", drop_mode == DropMode::hold_last ? "hold_last" : "delete"},
            {"seed", seed}};
  }
};

/// Applies the perturbation and records it under the "perturb" header field.
inline NormalizedSequence apply_perturbation(const NormalizedSequence& seq, const PerturbSpec& spec) {
  spec.validate();
  NormalizedSequence out = spec.kind == PerturbSpec::Kind::noise
                               ? inject_noise(seq, spec.sigma, spec.seed)
                               : drop_frames(seq, spec.rate, spec.drop_mode, spec.seed);
  auto history = out.extra.contains("perturb") && out.extra["perturb"].is_array() ? out.extra["perturb"]
                                                                                  : nlohmann::json::array();
  history.push_back(spec.provenance());
  out.extra["perturb"] = std::move(history);
  return out;
}

}  // namespace biolip
