#pragma once

#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "biolip/biolip.hpp"

namespace biolip::test {

/// Random raw frame holding every default-map id; commissures at (x0, 0, 0) and (x0 + width, 0, 0) plus jitter.
inline RawLandmarkFrame random_frame(std::int64_t index, std::mt19937_64& rng, const RegionMap& rm) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RawLandmarkFrame f;
  f.frame_index = index;
  f.valid = true;
  for (int id : rm.all_ids()) f.points[id] = {0.5 + 0.2 * u(rng), 0.5 + 0.2 * u(rng), 0.1 * u(rng)};
  const auto [l, r] = rm.commissure_ids();
  f.points[l] = {0.4 + 0.01 * u(rng), 0.5 + 0.01 * u(rng), 0.01 * u(rng)};
  f.points[r] = {0.6 + 0.01 * u(rng), 0.5 + 0.01 * u(rng), 0.01 * u(rng)};
  return f;
}

inline TrajectorySequence random_sequence(std::size_t n, std::uint64_t seed, const RegionMap& rm = RegionMap::default_map()) {
  std::mt19937_64 rng(seed);
  TrajectorySequence s;
  s.video_id = "vid_" + std::to_string(seed);
  s.fps = 25.0;
  s.label = 1;
  s.generator_tag = "gen";
  s.landmark_ids = rm.all_ids();
  s.commissure_ids = rm.commissure_ids();
  for (std::size_t t = 0; t < n; ++t) s.frames.push_back(random_frame(static_cast<std::int64_t>(t), rng, rm));
  return s;
}

/// Normalized sequence whose landmark rows are filled by f(t, landmark, axis).
template <class F>
NormalizedSequence sequence_from(std::size_t n, F f, std::string id = "seq", std::optional<int> label = 0) {
  NormalizedSequence s;
  s.video_id = std::move(id);
  s.label = label;
  s.landmark_ids = RegionMap::default_map().all_ids();
  s.commissure_ids = RegionMap::default_map().commissure_ids();
  for (std::size_t t = 0; t < n; ++t) {
    FrameMatrix m;
    for (int i = 0; i < 64; ++i)
      for (int a = 0; a < 3; ++a) m(i, a) = f(t, i, a);
    s.frames.push_back(m);
    s.commissures.push_back({Vec3{-0.5, 0.0, 0.0}, Vec3{0.5, 0.0, 0.0}});
    s.retained_indices.push_back(static_cast<std::int64_t>(t));
  }
  return s;
}

inline NormalizedSequence random_normalized(std::size_t n, std::uint64_t seed, std::optional<int> label = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  return sequence_from(n, [&](std::size_t, int, int) { return g(rng); }, "rand_" + std::to_string(seed), label);
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("biolip_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace biolip::test

#define EXPECT_ERRC(stmt, errc)                                              \
  do {                                                                       \
    try {                                                                    \
      stmt;                                                                  \
      ADD_FAILURE() << "expected " << ::biolip::errc_name(errc);             \
    } catch (const ::biolip::Error& e) {                                     \
      EXPECT_EQ(e.code(), errc) << e.what();                                 \
    }                                                                        \
  } while (0)
