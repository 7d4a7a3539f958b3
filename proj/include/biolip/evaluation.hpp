#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biolip/error.hpp"

namespace biolip {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Mean of per-window sigmoid outputs.
inline double video_score(std::span<const double> logits) {
  if (logits.empty()) throw Error(Errc::empty_video, "video has no windows");
  double sum = 0.0;
  for (double z : logits) sum += sigmoid(z);
  return sum / static_cast<double>(logits.size());
}

/// 1-based ranks with ties assigned their average rank.
inline std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

/// ROC-AUC through the rank-sum identity, ties counted as one half.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::shape_mismatch, "scores and labels differ in length");
  const auto ranks = midranks(scores);
  double rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      rank_sum += ranks[i];
      n_pos += 1.0;
    }
  }
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw Error(Errc::single_class, "AUC needs both classes");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

inline double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample variance (n - 1).
inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

/// (mean_a - mean_b) / pooled sample standard deviation.
inline double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error(Errc::zero_pooled_variance, "each group needs two samples");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double pooled = ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
  if (!(pooled > 0.0)) throw Error(Errc::zero_pooled_variance, "pooled variance is zero");
  return (mean(a) - mean(b)) / std::sqrt(pooled);
}

struct MannWhitneyResult {
  double u_a = 0.0;  ///< pairs with a > b, ties counted one half
  double u_b = 0.0;
  double z = 0.0;
  double p_value = 1.0;  ///< two-sided
};

/// Rank-sum U with a normal approximation (tie and continuity corrected) for p.
inline MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(Errc::shape_mismatch, "Mann-Whitney needs non-empty groups");
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  const auto ranks = midranks(all);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double r_a = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r_a += ranks[i];

  MannWhitneyResult res;
  res.u_a = r_a - na * (na + 1.0) / 2.0;
  res.u_b = na * nb - res.u_a;

  std::vector<double> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double n = na + nb;
  const double var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) return res;
  const double dev = std::abs(res.u_a - na * nb / 2.0) - 0.5;
  if (dev <= 0.0) return res;
  res.z = dev / std::sqrt(var);
  res.p_value = std::clamp(std::erfc(res.z / std::numbers::sqrt2), 0.0, 1.0);
  return res;
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - std::exp(log_front) * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// P(F > f) for an F(d1, d2) variable.
inline double f_survival(double f, double d1, double d2) {
  if (!(f > 0.0)) return 1.0;
  if (std::isinf(f)) return 0.0;
  return std::clamp(incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)), 0.0, 1.0);
}

struct AnovaResult {
  double f = 0.0;
  double p_value = 1.0;
  double df_between = 0.0;
  double df_within = 0.0;
};

/// One-way ANOVA: between-group over within-group mean square.
inline AnovaResult anova_f(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error(Errc::shape_mismatch, "ANOVA needs at least two groups");
  double grand = 0.0;
  double n = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw Error(Errc::shape_mismatch, "ANOVA groups need two samples each");
    for (double x : g) grand += x;
    n += static_cast<double>(g.size());
  }
  grand /= n;
  double ss_between = 0.0, ss_within = 0.0;
  for (const auto& g : groups) {
    const double m = mean(g);
    ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) ss_within += (x - m) * (x - m);
  }
  AnovaResult r;
  r.df_between = static_cast<double>(groups.size()) - 1.0;
  r.df_within = n - static_cast<double>(groups.size());
  if (!(ss_within > 0.0)) throw Error(Errc::zero_within_variance, "all groups are constant");
  r.f = (ss_between / r.df_between) / (ss_within / r.df_within);
  r.p_value = f_survival(r.f, r.df_between, r.df_within);
  return r;
}

struct Spectrum {
  std::vector<double> frequency;  ///< Hz, bins 0 .. N/2
  std::vector<double> power;      ///< one-sided density, units^2 / Hz
  double bin_width = 0.0;         ///< fs / N
};

/// Hann-windowed one-sided periodogram of the mean-removed series, scaled so that
/// sum(power) * bin_width == mean((w * (x - mean(x)))^2).
inline Spectrum trajectory_psd(std::span<const double> series, double fs) {
  const std::size_t n = series.size();
  if (n < 16) throw Error(Errc::series_too_short, "PSD needs at least 16 samples");
  if (!(fs > 0.0)) throw Error(Errc::invalid_config, "sampling rate must be positive");
  const double m = mean(series);
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    u[i] = w * (series[i] - m);
  }
  Spectrum s;
  s.bin_width = fs / static_cast<double>(n);
  const std::size_t half = n / 2;
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k <= half; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((k * i) % n) / nn;
      re += u[i] * std::cos(angle);
      im -= u[i] * std::sin(angle);
    }
    const bool doubled = k != 0 && !(n % 2 == 0 && k == half);
    s.frequency.push_back(static_cast<double>(k) * s.bin_width);
    s.power.push_back((doubled ? 2.0 : 1.0) * (re * re + im * im) / (nn * nn * s.bin_width));
  }
  return s;
}

/// Integrated power over bins whose centre frequency lies in [lo, hi].
inline double band_energy(const Spectrum& s, double lo, double hi) {
  double e = 0.0;
  for (std::size_t k = 0; k < s.frequency.size(); ++k)
    if (s.frequency[k] >= lo && s.frequency[k] <= hi) e += s.power[k] * s.bin_width;
  return e;
}

inline double total_power(const Spectrum& s) { return band_energy(s, 0.0, std::numeric_limits<double>::infinity()); }

struct ScoredVideo {
  std::string video_id;
  std::vector<double> window_logits;
  double score = 0.5;
  int label = 0;
  std::optional<std::string> generator_tag;

  static ScoredVideo make(std::string id, std::vector<double> logits, int label,
                          std::optional<std::string> tag = std::nullopt) {
    ScoredVideo v;
    v.video_id = std::move(id);
    v.score = video_score(logits);
    v.window_logits = std::move(logits);
    v.label = label;
    v.generator_tag = std::move(tag);
    return v;
  }
};

struct EvalReport {
  std::size_t n_videos = 0;
  double overall_auc = 0.0;
  /// Per generator tag of the fake videos: (n_videos in subset, AUC vs all real videos).
  std::map<std::string, std::pair<std::size_t, double>> per_generator;
  std::optional<double> mean_generator_auc;
};

inline double videos_auc(const std::vector<const ScoredVideo*>& vids) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto* v : vids) {
    scores.push_back(v->score);
    labels.push_back(v->label);
  }
  return roc_auc(scores, labels);
}

/// Overall AUC plus one AUC per fake-video generator tag (that generator's fakes
/// against every real video) and the mean over tags.
inline EvalReport evaluate(const std::vector<ScoredVideo>& videos) {
  EvalReport r;
  r.n_videos = videos.size();
  std::vector<const ScoredVideo*> all;
  std::vector<const ScoredVideo*> reals;
  std::map<std::string, std::vector<const ScoredVideo*>> fakes;
  for (const auto& v : videos) {
    all.push_back(&v);
    if (v.label == 0)
      reals.push_back(&v);
    else
      fakes[v.generator_tag.value_or("unknown")].push_back(&v);
  }
  r.overall_auc = videos_auc(all);
  if (!fakes.empty() && !reals.empty()) {
    double sum = 0.0;
    for (const auto& [tag, fv] : fakes) {
      auto subset = reals;
      subset.insert(subset.end(), fv.begin(), fv.end());
      const double auc = videos_auc(subset);
      r.per_generator[tag] = {subset.size(), auc};
      sum += auc;
    }
    r.mean_generator_auc = sum / static_cast<double>(fakes.size());
  }
  return r;
}

/// Two-group comparison (fake vs real) of one per-window statistic.
struct StatReport {
  std::string name;
  std::size_t n_fake = 0, n_real = 0;
  double mean_fake = 0.0, std_fake = 0.0, mean_real = 0.0, std_real = 0.0;
  double cohens_d = 0.0;       ///< fake minus real
  double u_fake = 0.0;         ///< Mann-Whitney U of the fake group
  double p_mann_whitney = 1.0;
  double f = 0.0;              ///< one-way ANOVA, k = 2
  double p_anova = 1.0;
  double delta_percent = 0.0;  ///< relative increase of the fake mean
};

inline StatReport compare_groups(std::string name, const std::vector<double>& fake, const std::vector<double>& real) {
  StatReport r;
  r.name = std::move(name);
  r.n_fake = fake.size();
  r.n_real = real.size();
  r.mean_fake = mean(fake);
  r.mean_real = mean(real);
  r.std_fake = std::sqrt(sample_variance(fake));
  r.std_real = std::sqrt(sample_variance(real));
  r.cohens_d = biolip::cohens_d(fake, real);
  const auto mw = mann_whitney_u(fake, real);
  r.u_fake = mw.u_a;
  r.p_mann_whitney = mw.p_value;
  const auto an = anova_f({fake, real});
  r.f = an.f;
  r.p_anova = an.p_value;
  r.delta_percent = r.mean_real != 0.0 ? 100.0 * (r.mean_fake - r.mean_real) / r.mean_real : 0.0;
  return r;
}

}  // namespace biolip
