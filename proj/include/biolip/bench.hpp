#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <unistd.h>
#include <vector>

#include "biolip/error.hpp"
#include "biolip/kinematics.hpp"
#include "biolip/network.hpp"
#include "biolip/region_map.hpp"
#include "biolip/synthetic.hpp"

// Single-window inference latency and steady-state memory.

namespace biolip {

struct BenchConfig {
  std::size_t warmup = 100;
  std::size_t iterations = 10000;
  /// Include kinematic feature extraction in every timed call.
  bool with_features = false;
  std::uint64_t seed = 42;
};

struct BenchResult {
  std::size_t iterations = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  long rss_start_kb = 0;  ///< after warmup
  long rss_end_kb = 0;
  double checksum = 0.0;  ///< sum of logits, keeps the work observable
};

/// Resident set size in KiB from /proc/self/statm; 0 where unavailable.
inline long resident_kb() {
  std::ifstream in("/proc/self/statm");
  long pages = 0, resident = 0;
  if (!(in >> pages >> resident)) return 0;
  return resident * (sysconf(_SC_PAGESIZE) / 1024);
}

/// Nearest-rank percentile of sorted values, q in [0, 1].
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

/// Times eval-mode forwards of one window cut from a synthetic jittery sequence.
inline BenchResult bench_forward(const ModelConfig& mcfg, const ModelParams& params, const FeatureConfig& fcfg,
                                 const RegionMap& rm, const BenchConfig& bc) {
  if (bc.iterations == 0) throw Error(Errc::invalid_config, "bench needs at least one iteration");
  SynthConfig scfg;
  scfg.n_frames = std::max<std::size_t>(fcfg.window_len, 25);
  const NormalizedSequence seq = gen_jittery(scfg, bc.seed, rm);
  const Window w{0, fcfg.window_len};
  const std::vector<WindowFeatures> one = {extract_window(seq, w, fcfg, rm)};
  const Batch fixed = Batch::from_windows(one);

  BenchResult r;
  auto call = [&] {
    if (!bc.with_features) return predict(mcfg, params, fixed)(0);
    const std::vector<WindowFeatures> f = {extract_window(seq, w, fcfg, rm)};
    return predict(mcfg, params, Batch::from_windows(f))(0);
  };
  for (std::size_t i = 0; i < bc.warmup; ++i) r.checksum += call();

  std::vector<double> ms;
  ms.reserve(bc.iterations);
  r.rss_start_kb = resident_kb();
  for (std::size_t i = 0; i < bc.iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    r.checksum += call();
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  r.rss_end_kb = resident_kb();
  r.iterations = bc.iterations;
  double sum = 0.0;
  for (double v : ms) sum += v;
  r.mean_ms = sum / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  r.p50_ms = percentile_sorted(ms, 0.50);
  r.p99_ms = percentile_sorted(ms, 0.99);
  return r;
}

}  // namespace biolip
