// Acceptance suite: prints one PASS/FAIL/SKIP line per criterion A1..A10 and
// exits non-zero if any criterion fails. Diagnostic lines start with '#'.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <tuple>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "biolip/biolip.hpp"
#include "cli_util.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace biolip;

namespace {

// Pinned tolerances and thresholds.
constexpr int kA1Samples = 64;
constexpr int kA1Batches = 3;
constexpr Index kA1BatchSize = 4;
constexpr double kA1MaxRelError = 1e-4;
constexpr double kA1MaxSeconds = 60.0;
constexpr Index kA2Default = 302145;
constexpr Index kA2NoStat = 260737;
constexpr double kA3MinAuc = 0.95;
constexpr double kA3MaxSeconds = 15.0 * 60.0;
constexpr double kA4MaxP = 1e-3;
constexpr double kA5MaxMeanMs = 5.0;
constexpr long kA5MaxRssGrowthKb = 1024;
constexpr double kA6MinAucDrop = 0.05;
constexpr double kA7MaxAucDrop = 0.05;
constexpr double kA7Sigma = 0.005;
constexpr double kA8ParsevalRel = 1e-9;
constexpr double kA8AnovaRel = 1e-9;
constexpr double kA8KinematicRel = 1e-12;
constexpr double kA10AvlipsMinAuc = 0.95;
constexpr double kA10TimitMinMeanAuc = 0.85;

enum class Status { pass, fail, skip };

struct Outcome {
  Status status;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void report(const char* id, const char* title, const Outcome& o) {
  const char* s = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
  if (o.status == Status::fail) ++failures;
  std::printf("%s %s  %s: %s\n", id, s, title, o.detail.c_str());
  std::fflush(stdout);
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {Status::fail, std::string("threw ") + e.what()};
  }
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

// ---------------------------------------------------------------------------

Outcome a1_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig cfg;
  double worst = 0.0;
  int checked = 0;
  for (int b = 0; b < kA1Batches; ++b) {
    const ModelParams p = test::perturbed_params(cfg, 100 + static_cast<std::uint64_t>(b));
    const Batch batch = test::random_batch(cfg, kA1BatchSize, 200 + static_cast<std::uint64_t>(b));
    const auto r = test::gradient_check(cfg, p, batch, kA1Samples, 300 + static_cast<std::uint64_t>(b));
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
  }
  const double secs = seconds_since(t0);
  return verdict(worst < kA1MaxRelError && secs < kA1MaxSeconds,
                 std::to_string(checked) + " parameters, max relative error " + fmt(worst) + " (< " +
                     fmt(kA1MaxRelError) + "), " + fmt(secs, 3) + " s (< 60 s)");
}

Outcome a2_parameter_count() {
  ModelConfig cfg;
  const Index full = make_params(cfg).trainable_count();
  cfg.branches.stat = false;
  const Index no_stat = make_params(cfg).trainable_count();
  return verdict(full == kA2Default && no_stat == kA2NoStat,
                 "default " + std::to_string(full) + " (want 302145), stat branch off " + std::to_string(no_stat) +
                     " (want 260737)");
}

// Shared synthetic experiment behind A3, A4, A5, A6 and A7.
struct Experiment {
  SynthConfig synth;
  std::vector<NormalizedSequence> train, val, test;
  ModelConfig model;
  FeatureConfig features;
  ModelParams params;
  double test_auc = 0.0;
  double seconds = 0.0;
  int epochs_run = 0;
  int best_epoch = 0;
};

double auc_of(const Experiment& e, const std::vector<NormalizedSequence>& seqs) {
  const WindowSet ws(seqs, e.features, RegionMap::default_map());
  return video_auc(score_videos(e.model, e.params, ws));
}

std::optional<Experiment> run_experiment() {
  const auto t0 = std::chrono::steady_clock::now();
  Experiment e;
  e.synth.jitter_sigma = 0.01;
  const std::uint64_t seed = 42;
  e.train = gen_sequences(e.synth, 200, 200, mix_seed(seed, std::uint64_t{1}));
  e.val = gen_sequences(e.synth, 50, 50, mix_seed(seed, std::uint64_t{2}));
  e.test = gen_sequences(e.synth, 50, 50, mix_seed(seed, std::uint64_t{3}));
  e.model = ModelConfig::for_features(e.features);
  TrainConfig tcfg;
  tcfg.seed = seed;
  const RegionMap rm = RegionMap::default_map();
  const WindowSet tr(e.train, e.features, rm), va(e.val, e.features, rm);
  const auto result = train(tr, va, e.model, tcfg, [](const EpochRecord& r) {
    std::printf("# A3 epoch %2d  loss %.5f  val_auc %.5f  lr %.3e\n", r.epoch, r.loss, r.val_auc, r.lr);
    std::fflush(stdout);
  });
  e.params = result.best;
  e.epochs_run = static_cast<int>(result.history.epochs.size());
  e.best_epoch = result.history.best_epoch;
  e.test_auc = auc_of(e, e.test);
  e.seconds = seconds_since(t0);
  return e;
}

Outcome a3_end_to_end(const Experiment& e) {
  return verdict(e.test_auc >= kA3MinAuc && e.seconds < kA3MaxSeconds,
                 "test video AUC " + fmt(e.test_auc, 6) + " (>= 0.95), " + std::to_string(e.epochs_run) +
                     " epochs (best " + std::to_string(e.best_epoch) + "), " + fmt(e.seconds, 4) + " s (< 900 s)");
}

Outcome a4_effect_sizes(const Experiment& e) {
  const WindowSet ws(e.test, e.features, RegionMap::default_map());
  bool ok = true;
  std::string detail;
  double d[4] = {};
  for (int k = 0; k < 4; ++k) {
    const auto g = window_sigma_groups(ws, k);
    d[k] = cohens_d(g.fake, g.real);
    const double p = mann_whitney_u(g.fake, g.real).p_value;
    ok = ok && d[k] > 0.0 && p < kA4MaxP;
    detail += "d" + std::to_string(k) + "=" + fmt(d[k]) + " p=" + fmt(p, 3) + "; ";
  }
  ok = ok && d[3] > d[1];
  return verdict(ok, detail + "d(jerk) > d(velocity): " + (d[3] > d[1] ? "yes" : "no"));
}

Outcome a5_latency(const Experiment& e) {
  test::TempDir dir("acceptance_bench");
  Checkpoint c;
  c.model = e.model;
  c.features = e.features;
  c.params = e.params;
  const auto ckpt = dir.path / "a3.ckpt";
  save_checkpoint(ckpt, c);
  const auto csv = dir.path / "bench.csv";
  const auto r = test::run_cli({"bench", "--ckpt", ckpt.string(), "--report", csv.string()});
  if (r.exit_code != 0) return {Status::fail, "bench exited " + std::to_string(r.exit_code) + ": " + r.output};
  const auto rows = test::read_csv(csv);
  if (rows.size() != 2 || rows[1].size() != 8) return {Status::fail, "unexpected bench report"};
  const double mean = std::stod(rows[1][3]), p50 = std::stod(rows[1][4]), p99 = std::stod(rows[1][5]);
  const long growth = std::stol(rows[1][7]) - std::stol(rows[1][6]);
  return verdict(mean < kA5MaxMeanMs && growth <= kA5MaxRssGrowthKb,
                 rows[1][2] + " forwards: mean " + fmt(mean) + " ms (< 5), p50 " + fmt(p50) + " ms, p99 " +
                     fmt(p99) + " ms; RSS growth " + std::to_string(growth) + " KiB (<= 1024)");
}

Outcome a6_smoothed_jitter(const Experiment& e) {
  SynthConfig smoothed = e.synth;
  smoothed.jitter_mode = JitterMode::smoothed;
  const auto test_smoothed = gen_sequences(smoothed, 50, 50, mix_seed(42, std::uint64_t{3}));
  const double auc = auc_of(e, test_smoothed);
  const double drop = e.test_auc - auc;

  const auto white_psd = class_psd(e.test);
  const auto smooth_psd = class_psd(test_smoothed);
  const double real = band_energy(white_psd.real, 1.0, 8.0);
  const double white = band_energy(white_psd.fake, 1.0, 8.0);
  const double smoothed_fake = band_energy(smooth_psd.fake, 1.0, 8.0);
  const bool closer = std::abs(smoothed_fake - real) < std::abs(white - real);
  return verdict(drop >= kA6MinAucDrop && closer,
                 "smoothed-jitter AUC " + fmt(auc) + ", drop " + fmt(drop) + " (>= 0.05); 1-8 Hz energy real " +
                     fmt(real) + ", smoothed " + fmt(smoothed_fake) + ", white " + fmt(white));
}

Outcome a7_noise_control(const Experiment& e) {
  const double sigmas[] = {0.0, 0.001, 0.002, 0.005, 0.01};
  double prev_real = -1.0, prev_fake = -1.0;
  bool monotone = true;
  std::optional<double> auc_at;
  std::string trace;
  for (double s : sigmas) {
    std::vector<NormalizedSequence> noisy;
    for (const auto& q : e.test) noisy.push_back(inject_noise(q, s, 42));
    const WindowSet ws(noisy, e.features, RegionMap::default_map());
    const auto g = window_sigma_groups(ws, 3);
    const double r = mean(g.real), f = mean(g.fake);
    monotone = monotone && r >= prev_real && f >= prev_fake;
    prev_real = r;
    prev_fake = f;
    trace += fmt(s, 3) + ":" + fmt(r, 3) + "/" + fmt(f, 3) + " ";
    if (s == kA7Sigma) auc_at = auc_of(e, noisy);
  }
  const double drop = e.test_auc - *auc_at;
  return verdict(monotone && std::abs(drop) <= kA7MaxAucDrop,
                 "mean sigma3 real/fake by noise " + trace + (monotone ? "(monotone)" : "(NOT monotone)") +
                     "; AUC at 0.005 " + fmt(*auc_at) + " (baseline " + fmt(e.test_auc) + ")");
}

// ---------------------------------------------------------------------------

double brute_force_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

double naive_sigma(const NormalizedSequence& seq, std::size_t start, std::size_t len, std::size_t landmark, int axis,
                   int order) {
  std::vector<double> d;
  for (std::size_t t = 0; t + static_cast<std::size_t>(order) < len; ++t) {
    double v = 0.0;
    double binom = 1.0;
    for (int j = 0; j <= order; ++j) {
      if (j > 0) binom = binom * (order - j + 1) / j;
      const double sign = ((order - j) % 2 == 0) ? 1.0 : -1.0;
      v += sign * binom * seq.frames[start + t + static_cast<std::size_t>(j)](static_cast<Index>(landmark), axis);
    }
    d.push_back(v);
  }
  double m = 0.0;
  for (double v : d) m += v;
  m /= static_cast<double>(d.size());
  double ss = 0.0;
  for (double v : d) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(d.size()));
}

Outcome a8_statistics_oracles() {
  std::mt19937_64 rng(8);
  std::string detail;
  bool ok = true;

  int auc_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 50)(rng);
    std::uniform_int_distribution<int> level(0, trial % 2 ? 5 : 1000);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) / 10.0;
      y[i] = static_cast<int>(i % 2);
    }
    std::shuffle(y.begin(), y.end(), rng);
    auc_mismatch += roc_auc(s, y) != brute_force_auc(s, y);
  }
  ok = ok && auc_mismatch == 0;
  detail += "AUC mismatches " + std::to_string(auc_mismatch) + "/1000; ";

  std::normal_distribution<double> g;
  double anova_worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(2 + static_cast<std::size_t>(trial % 30)), b(2 + static_cast<std::size_t>(trial % 17));
    for (auto& x : a) x = g(rng) + 0.4;
    for (auto& x : b) x = g(rng);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double sp = ((na - 1) * sample_variance(a) + (nb - 1) * sample_variance(b)) / (na + nb - 2);
    const double t = (mean(a) - mean(b)) / std::sqrt(sp * (1 / na + 1 / nb));
    anova_worst = std::max(anova_worst, std::abs(anova_f({a, b}).f - t * t) / (t * t));
  }
  ok = ok && anova_worst < kA8AnovaRel;
  detail += "F vs t^2 rel " + fmt(anova_worst, 3) + "; ";

  double parseval_worst = 0.0;
  for (std::size_t n : {16u, 25u, 64u, 100u, 257u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = g(rng) + 2.0;
    const double m = mean(x);
    double windowed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1)));
      windowed += std::pow(w * (x[i] - m), 2);
    }
    windowed /= static_cast<double>(n);
    parseval_worst = std::max(parseval_worst, std::abs(total_power(trajectory_psd(x, 25.0)) / windowed - 1.0));
  }
  ok = ok && parseval_worst < kA8ParsevalRel;
  detail += "Parseval rel " + fmt(parseval_worst, 3) + "; ";

  FeatureConfig cfg;
  cfg.axes = {0, 1, 2};
  double kin_worst = 0.0;
  std::size_t compared = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto seq = test::random_normalized(60, 900 + seed);
    for (const auto& w : windows(seq, cfg)) {
      const Eigen::VectorXd s = kinematic_stats(seq, w, cfg);
      for (std::size_t o = 0; o < cfg.orders.size(); ++o)
        for (std::size_t a = 0; a < cfg.axes.size(); ++a)
          for (std::size_t l = 0; l < kNumLandmarks; ++l) {
            const double want = naive_sigma(seq, w.start, w.length, l, cfg.axes[a], cfg.orders[o]);
            const double got = s(static_cast<Index>(feature_column(cfg, o, a, l)));
            kin_worst = std::max(kin_worst, std::abs(got - want) / std::abs(want));
            ++compared;
          }
    }
  }
  ok = ok && kin_worst < kA8KinematicRel;
  detail += "kinematic rel " + fmt(kin_worst, 3) + " over " + std::to_string(compared) + " stats";
  return verdict(ok, detail);
}

Outcome a9_determinism() {
  test::TempDir dir("acceptance_det");
  const auto d = dir.path;
  for (const auto& [name, seed, n] : {std::tuple{"train", "11", "10"}, std::tuple{"val", "12", "5"}}) {
    const auto r = test::run_cli({"synth", "--out", (d / name).string(), "--n-real", n, "--n-fake", n, "--seed", seed});
    if (r.exit_code != 0) return {Status::fail, "synth failed: " + r.output};
  }
  std::ofstream(d / "config.json") << R"({"train": {"epochs": 3, "patience": 3, "batch_size": 64, "seed": 7}})";
  std::string bytes[2];
  for (int run = 0; run < 2; ++run) {
    const auto out = d / ("run" + std::to_string(run) + ".ckpt");
    const auto r = test::run_cli({"train", "--train", (d / "train").string(), "--val", (d / "val").string(),
                                  "--config", (d / "config.json").string(), "--out", out.string(), "--quiet"});
    if (r.exit_code != 0) return {Status::fail, "train failed: " + r.output};
    bytes[run] = test::read_file(out);
  }
  std::istringstream in(bytes[0], std::ios::binary);
  std::ostringstream again(std::ios::binary);
  write_checkpoint(again, read_checkpoint(in));
  const bool same = bytes[0] == bytes[1];
  const bool round_trip = again.str() == bytes[0];
  return verdict(same && round_trip && !bytes[0].empty(),
                 "two seeded CLI train runs " + std::string(same ? "bit-identical" : "DIFFER") + " (" +
                     std::to_string(bytes[0].size()) + " bytes); checkpoint round-trip " +
                     (round_trip ? "bit-exact" : "NOT bit-exact"));
}

// ---------------------------------------------------------------------------

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

Outcome a10_user_data() {
  const char* avlips = env("BIOLIP_AVLIPS_DIR");
  const char* timit = env("BIOLIP_LIPSYNCTIMIT_DIR");
  const char* ckpt_env = env("BIOLIP_A10_CKPT");
  if (!avlips && !timit)
    return {Status::skip, "set BIOLIP_AVLIPS_DIR (train/ val/ test/) and/or BIOLIP_LIPSYNCTIMIT_DIR to run"};

  test::TempDir dir("acceptance_a10");
  std::string detail;
  bool ok = true;
  std::string model = ckpt_env ? ckpt_env : "";
  auto auc_report = [&](const std::string& data, const std::string& tag) -> std::vector<std::vector<std::string>> {
    const auto csv = dir.path / (tag + ".csv");
    const auto r = test::run_cli({"eval", "--ckpt", model, "--data", data, "--report", csv.string()});
    if (r.exit_code != 0) throw std::runtime_error("eval on " + data + " failed: " + r.output);
    return test::read_csv(csv);
  };

  if (avlips) {
    const fs::path root(avlips);
    model = (dir.path / "avlips.ckpt").string();
    const auto r = test::run_cli({"train", "--train", (root / "train").string(), "--val", (root / "val").string(),
                                  "--out", model, "--quiet"});
    if (r.exit_code != 0) return {Status::fail, "AVLips training failed: " + r.output};
    const auto rows = auc_report((root / "test").string(), "avlips");
    const double auc = std::stod(rows.at(1).at(3));
    ok = ok && auc >= kA10AvlipsMinAuc;
    detail += "AVLips in-distribution AUC " + fmt(auc) + " (>= 0.95); ";
  }
  if (timit) {
    if (model.empty()) {
      detail += "LipSyncTIMIT skipped: needs BIOLIP_AVLIPS_DIR or BIOLIP_A10_CKPT for the zero-shot model";
      return {ok && avlips ? Status::pass : Status::skip, detail};
    }
    std::optional<double> mean_auc;
    for (const auto& row : auc_report(timit, "timit"))
      if (row.size() == 4 && row[0] == "generator_mean") mean_auc = std::stod(row[3]);
    if (!mean_auc) return {Status::fail, detail + "no generator_mean row for LipSyncTIMIT"};
    ok = ok && *mean_auc >= kA10TimitMinMeanAuc;
    detail += "LipSyncTIMIT CRF=23 mean generator AUC " + fmt(*mean_auc) + " (>= 0.85)";
  }
  return verdict(ok, detail);
}

}  // namespace

int main() {
  std::printf("# biolip acceptance suite\n");
  report("A1", "gradient correctness", guarded(a1_gradients));
  report("A2", "parameter count", guarded(a2_parameter_count));

  std::optional<Experiment> exp;
  std::string exp_error;
  try {
    exp = run_experiment();
  } catch (const std::exception& e) {
    exp_error = e.what();
  }
  auto with_exp = [&](Outcome (*f)(const Experiment&)) {
    if (!exp) return Outcome{Status::fail, "synthetic experiment failed: " + exp_error};
    return guarded([&] { return f(*exp); });
  };
  report("A3", "synthetic end-to-end", with_exp(a3_end_to_end));
  report("A4", "effect sizes", with_exp(a4_effect_sizes));
  report("A5", "latency", with_exp(a5_latency));
  report("A6", "smoothed-jitter analog", with_exp(a6_smoothed_jitter));
  report("A7", "noise-control monotonicity", with_exp(a7_noise_control));
  report("A8", "statistics oracles", guarded(a8_statistics_oracles));
  report("A9", "determinism", guarded(a9_determinism));
  report("A10", "user-supplied datasets", guarded(a10_user_data));
  std::printf("# %d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
