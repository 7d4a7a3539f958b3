#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace biolip;

namespace {

bool same_frames(const NormalizedSequence& a, const NormalizedSequence& b) {
  if (a.frames.size() != b.frames.size()) return false;
  for (std::size_t t = 0; t < a.frames.size(); ++t)
    if (a.frames[t] != b.frames[t]) return false;
  return a.retained_indices == b.retained_indices;
}

double mean_sigma(const std::vector<NormalizedSequence>& seqs, int label, int order) {
  WindowSet ws(seqs, FeatureConfig{}, RegionMap::default_map());
  const auto g = window_sigma_groups(ws, order);
  return mean(label == 1 ? g.fake : g.real);
}

std::vector<NormalizedSequence> with_noise(const std::vector<NormalizedSequence>& seqs, double sigma) {
  std::vector<NormalizedSequence> out;
  for (const auto& s : seqs) out.push_back(inject_noise(s, sigma, 42));
  return out;
}

}  // namespace

TEST(InjectNoise, ZeroSigmaIsIdentity) {
  const auto s = test::random_normalized(40, 1);
  EXPECT_TRUE(same_frames(inject_noise(s, 0.0, 7), s));
  EXPECT_ERRC(inject_noise(s, -0.1, 7), Errc::invalid_config);
}

TEST(InjectNoise, SeededAndIndependentOfOtherSequences) {
  const auto s = test::random_normalized(40, 2);
  EXPECT_TRUE(same_frames(inject_noise(s, 0.01, 7), inject_noise(s, 0.01, 7)));
  EXPECT_FALSE(same_frames(inject_noise(s, 0.01, 7), inject_noise(s, 0.01, 8)));
  auto renamed = s;
  renamed.video_id = "other";
  EXPECT_FALSE(same_frames(inject_noise(s, 0.01, 7), inject_noise(renamed, 0.01, 7)));
}

TEST(InjectNoise, NoiseHasRequestedScaleOnEnabledAxesOnly) {
  const auto s = test::sequence_from(200, [](std::size_t, int, int) { return 0.0; });
  const auto n = inject_noise(s, 0.02, 3, {axis_y});
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (const auto& f : n.frames)
    for (Eigen::Index i = 0; i < 64; ++i) {
      EXPECT_EQ(f(i, 0), 0.0);
      EXPECT_EQ(f(i, 2), 0.0);
      sum += f(i, 1);
      sq += f(i, 1) * f(i, 1);
      ++count;
    }
  const double m = sum / static_cast<double>(count);
  const double sd = std::sqrt(sq / static_cast<double>(count) - m * m);
  // 12,800 draws: standard error of the sd estimate is about 0.02 / sqrt(2 * 12800).
  EXPECT_NEAR(sd, 0.02, 4 * 0.02 / std::sqrt(2.0 * static_cast<double>(count)));
  EXPECT_NEAR(m, 0.0, 4 * 0.02 / std::sqrt(static_cast<double>(count)));
  EXPECT_EQ(n.commissures, s.commissures);
}

TEST(InjectNoise, RaisesJerkForBothClasses) {
  const auto seqs = gen_sequences(SynthConfig{}, 10, 10, 11);
  const auto noisy = with_noise(seqs, 0.005);
  for (int label : {0, 1}) EXPECT_GT(mean_sigma(noisy, label, 3), mean_sigma(seqs, label, 3)) << label;
}

TEST(InjectNoise, JerkIsMonotoneAcrossNoiseLevels) {
  const auto seqs = gen_sequences(SynthConfig{}, 100, 100, 12);
  for (int label : {0, 1}) {
    double prev = mean_sigma(seqs, label, 3);
    for (double sigma : {0.001, 0.002, 0.005, 0.010, 0.020, 0.030, 0.050}) {
      const double cur = mean_sigma(with_noise(seqs, sigma), label, 3);
      EXPECT_GE(cur, prev) << "label " << label << " sigma " << sigma;
      prev = cur;
    }
  }
}

TEST(DropFrames, ZeroRateIsIdentityAndRateOneIsRejected) {
  const auto s = test::random_normalized(30, 3);
  for (auto mode : {DropMode::hold_last, DropMode::remove}) EXPECT_TRUE(same_frames(drop_frames(s, 0.0, mode, 1), s));
  EXPECT_ERRC(drop_frames(s, 1.0, DropMode::hold_last, 1), Errc::degenerate_rate);
  EXPECT_ERRC(drop_frames(s, 1.5, DropMode::hold_last, 1), Errc::invalid_config);
}

TEST(DropFrames, HoldLastKeepsLengthAndFreezesAboutHalf) {
  const auto s = test::random_normalized(100, 4);
  double total = 0.0;
  const int trials = 50;
  for (int k = 0; k < trials; ++k) {
    const auto d = drop_frames(s, 0.5, DropMode::hold_last, static_cast<std::uint64_t>(k));
    ASSERT_EQ(d.size(), 100u);
    EXPECT_EQ(d.frames[0], s.frames[0]);
    std::size_t frozen = 0;
    for (std::size_t t = 1; t < 100; ++t) {
      if (d.frames[t] == d.frames[t - 1]) {
        ++frozen;
      } else {
        EXPECT_EQ(d.frames[t], s.frames[t]);
      }
    }
    // Binomial(99, 0.5): mean 49.5, sd ~4.97.
    EXPECT_NEAR(static_cast<double>(frozen), 49.5, 4 * 4.975);
    total += static_cast<double>(frozen);
  }
  EXPECT_NEAR(total / trials, 49.5, 4 * 4.975 / std::sqrt(static_cast<double>(trials)));
}

TEST(DropFrames, DeleteShrinksAndPreservesOrder) {
  const auto s = test::random_normalized(100, 5);
  const auto d = drop_frames(s, 0.5, DropMode::remove, 9);
  EXPECT_NEAR(static_cast<double>(d.size()), 50.5, 4 * 4.975);
  EXPECT_EQ(d.frames[0], s.frames[0]);
  for (std::size_t t = 1; t < d.size(); ++t) EXPECT_GT(d.retained_indices[t], d.retained_indices[t - 1]);
  // Survivors appear in their original order.
  std::size_t src = 0;
  for (const auto& f : d.frames) {
    while (src < s.size() && s.frames[src] != f) ++src;
    ASSERT_LT(src, s.size());
    ++src;
  }
  EXPECT_EQ(d.commissures.size(), d.size());
}

TEST(DropFrames, Seeded) {
  const auto s = test::random_normalized(60, 6);
  for (auto mode : {DropMode::hold_last, DropMode::remove})
    EXPECT_TRUE(same_frames(drop_frames(s, 0.3, mode, 5), drop_frames(s, 0.3, mode, 5)));
}

TEST(PerturbSpec, ValidationAndProvenance) {
  PerturbSpec noise;
  noise.sigma = 0.005;
  noise.rate = 0.1;
  EXPECT_ERRC(noise.validate(), Errc::invalid_config);
  PerturbSpec drop;
  drop.kind = PerturbSpec::Kind::frame_drop;
  drop.rate = 0.25;
  drop.drop_mode = DropMode::remove;
  drop.validate();

  const auto s = test::random_normalized(30, 7);
  noise.rate = 0.0;
  const auto once = apply_perturbation(s, noise);
  const auto twice = apply_perturbation(once, drop);
  ASSERT_TRUE(twice.extra["perturb"].is_array());
  ASSERT_EQ(twice.extra["perturb"].size(), 2u);
  EXPECT_EQ(twice.extra["perturb"][0]["kind"], "noise");
  EXPECT_EQ(twice.extra["perturb"][0]["sigma"], 0.005);
  EXPECT_EQ(twice.extra["perturb"][1]["drop_mode"], "delete");
}

TEST(PerturbSpec, ProvenanceSurvivesJsonl) {
  PerturbSpec p;
  p.sigma = 0.01;
  const auto s = apply_perturbation(gen_smooth(SynthConfig{}, 1), p);
  std::stringstream io;
  write_trajectory_file(io, to_trajectory(s));
  const auto back = parse_trajectory_file(io);
  ASSERT_TRUE(back.extra.contains("perturb"));
  EXPECT_EQ(back.extra["perturb"][0]["sigma"], 0.01);
}
