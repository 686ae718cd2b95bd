#pragma once

// Monte Carlo ensembles over independent cascade environments, plus the
// goodness-of-fit and trend statistics used to read them.
//
// Replicate i of an ensemble uses environment seed mix_seed(base_seed, i).
// Path sampling inside environment i draws from CounterStream streams keyed
// by mix_seed(base_seed ^ kPathStreamSalt, i), one stream per block of
// kPathsPerStream paths, so results do not depend on the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "json.hpp"
#include "treepoly/cascade.hpp"
#include "treepoly/disorder.hpp"
#include "treepoly/laplace.hpp"
#include "treepoly/measure.hpp"
#include "treepoly/parallel.hpp"
#include "treepoly/philox.hpp"

namespace treepoly {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::uint64_t kPathStreamSalt = 0x70617468735F7374ull;
inline constexpr std::size_t kPathsPerStream = 4096;

inline const char* tool_version() {
#ifdef TREEPOLY_VERSION
  return TREEPOLY_VERSION;
#else
  return "0.0.0";
#endif
}

// ---------------------------------------------------------------- basics

/// Type-7 (linear interpolation) quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ConfigError("quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, 0.5);
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// One-sample Kolmogorov-Smirnov distance sup_x |F_emp(x) - F(x)|.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.size() < 2) throw ConfigError("ks_statistic needs at least two samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// KS distance for data on the lattice origin + spacing*Z, with the
/// empirical CDF compared to `cdf` at the lattice midpoints (continuity
/// correction). Plain KS on lattice data is bounded below by half the
/// largest atom, which does not vanish at moderate sample sizes.
inline double lattice_ks_statistic(std::vector<double> samples, double origin, double spacing,
                                   const std::function<double(double)>& cdf) {
  if (samples.size() < 2) throw ConfigError("ks_statistic needs at least two samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < samples.size()) {
    std::size_t j = i;
    while (j < samples.size() && samples[j] == samples[i]) ++j;
    const double k = std::round((samples[i] - origin) / spacing);
    // Empirical CDF just above the atom vs. the continuous CDF at the
    // midpoints on either side of it.
    const double below = static_cast<double>(i) / n;
    const double above = static_cast<double>(j) / n;
    d = std::max(d, std::abs(below - cdf(origin + (k - 0.5) * spacing)));
    d = std::max(d, std::abs(above - cdf(origin + (k + 0.5) * spacing)));
    i = j;
  }
  return d;
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson chi-square of counts against cell probabilities. Cells with
/// expected count below `min_expected` are pooled into one cell.
inline ChiSquareResult chi_square_test(std::span<const std::uint64_t> observed,
                                       std::span<const double> probabilities,
                                       double min_expected = 5.0) {
  if (observed.size() != probabilities.size() || observed.empty())
    throw ConfigError("chi_square_test: size mismatch");
  const double total = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::uint64_t{0}));
  ChiSquareResult out;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double expected = total * probabilities[i];
    if (expected < min_expected) {
      pooled_obs += static_cast<double>(observed[i]);
      pooled_exp += expected;
      continue;
    }
    const double diff = static_cast<double>(observed[i]) - expected;
    out.statistic += diff * diff / expected;
    ++cells;
  }
  if (pooled_exp > 0.0) {
    const double diff = pooled_obs - pooled_exp;
    out.statistic += diff * diff / pooled_exp;
    ++cells;
  }
  out.dof = cells - 1;
  if (out.dof < 1) return out;
  boost::math::chi_squared dist(out.dof);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

/// Least-squares slope of ys[i] against xs[i].
inline double least_squares_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw ConfigError("slope needs >= 2 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

// -------------------------------------------------------------- ensembles

struct EnsembleConfig {
  DisorderSpec spec;
  int depth = 12;
  int replicates = 100;
  std::uint64_t base_seed = 1;

  std::uint64_t replicate_seed(std::size_t i) const { return mix_seed(base_seed, i); }

  nlohmann::json to_json() const {
    return {{"spec", spec.to_json()},
            {"depth", depth},
            {"replicates", replicates},
            {"base_seed", base_seed},
            {"seed_mixing", "splitmix64(base_seed + 0x9E3779B97F4A7C15 * index)"}};
  }
};

struct StatSummary {
  std::size_t count = 0;
  double q10 = std::nan(""), q25 = std::nan(""), q50 = std::nan(""), q75 = std::nan(""),
         q90 = std::nan("");
  double mean = std::nan("");
  double stderr_ = std::nan("");

  static StatSummary of(std::vector<double> xs) {
    StatSummary s;
    s.count = xs.size();
    if (xs.empty()) return s;
    CompensatedSum total;
    for (double x : xs) total.add(x);
    s.mean = total.value() / static_cast<double>(xs.size());
    if (xs.size() > 1) {
      CompensatedSum ss;
      for (double x : xs) ss.add((x - s.mean) * (x - s.mean));
      s.stderr_ = std::sqrt(ss.value() / static_cast<double>(xs.size() - 1) /
                            static_cast<double>(xs.size()));
    }
    std::sort(xs.begin(), xs.end());
    s.q10 = quantile_sorted(xs, 0.10);
    s.q25 = quantile_sorted(xs, 0.25);
    s.q50 = quantile_sorted(xs, 0.50);
    s.q75 = quantile_sorted(xs, 0.75);
    s.q90 = quantile_sorted(xs, 0.90);
    return s;
  }

  nlohmann::json to_json() const {
    return {{"count", count}, {"q10", q10}, {"q25", q25}, {"q50", q50}, {"q75", q75},
            {"q90", q90},     {"mean", mean}, {"stderr", stderr_}};
  }
};

struct ReplicateResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  MartingaleSeries series;
};

/// Per-depth distribution of Z_k, ln Z_k, D_k and the valid ratios R_k.
struct DepthSummary {
  int depth = 0;
  StatSummary z, log_z, d, ratio;
  std::size_t invalid = 0;  // replicates with D_k <= 0
};

struct EnsembleSummary {
  EnsembleConfig config;
  std::vector<DepthSummary> rows;  // rows[k] for k = 0..depth

  nlohmann::json to_json() const;
};

/// Aggregates replicate results; sorts by replicate index first, so the input
/// order does not matter.
inline EnsembleSummary summarize(const EnsembleConfig& config, std::vector<ReplicateResult> results) {
  std::sort(results.begin(), results.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });
  EnsembleSummary out;
  out.config = config;
  for (int k = 0; k <= config.depth; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    std::vector<double> z, log_z, d, ratio;
    std::size_t invalid = 0;
    for (const auto& r : results) {
      z.push_back(r.series.z[ku]);
      log_z.push_back(r.series.log_z[ku]);
      d.push_back(r.series.d[ku]);
      if (r.series.ratio[ku]) ratio.push_back(*r.series.ratio[ku]);
      if (k > 0 && !(r.series.d[ku] > 0.0)) ++invalid;
    }
    out.rows.push_back({k, StatSummary::of(z), StatSummary::of(log_z), StatSummary::of(d),
                        StatSummary::of(ratio), invalid});
  }
  return out;
}

inline std::vector<ReplicateResult> run_replicates(const EnsembleConfig& config) {
  if (config.replicates < 1) throw ConfigError("ensemble needs at least one replicate");
  std::vector<ReplicateResult> results(static_cast<std::size_t>(config.replicates));
  parallel_for(results.size(), [&](std::size_t i) {
    const auto seed = config.replicate_seed(i);
    results[i] = {i, seed, martingale_series(WeightOracle(seed, config.spec), config.depth)};
  });
  return results;
}

inline EnsembleSummary run_ensemble(const EnsembleConfig& config) {
  // Validates depth before spending any work.
  WeightOracle(0, config.spec).check_depth(config.depth, "ensemble");
  return summarize(config, run_replicates(config));
}

inline nlohmann::json EnsembleSummary::to_json() const {
  nlohmann::json depths = nlohmann::json::array();
  for (const auto& row : rows) {
    depths.push_back({{"k", row.depth},
                      {"z", row.z.to_json()},
                      {"log_z", row.log_z.to_json()},
                      {"d", row.d.to_json()},
                      {"ratio", row.ratio.to_json()},
                      {"invalid", row.invalid}});
  }
  return {{"schema_version", kSchemaVersion},
          {"tool_version", tool_version()},
          {"kind", "ensemble_summary"},
          {"config", config.to_json()},
          {"depths", depths}};
}

// ---------------------------------------------------------------- reports

/// LS slope of the median ln Z_k over k = 1..depth.
inline double median_log_z_slope(const EnsembleSummary& s) {
  std::vector<double> ks, ys;
  for (const auto& row : s.rows) {
    if (row.depth == 0) continue;
    ks.push_back(row.depth);
    ys.push_back(row.log_z.q50);
  }
  return least_squares_slope(ks, ys);
}

struct DichotomyVerdict {
  EnsembleConfig weak_config, strong_config;
  std::vector<double> weak_median_log_z, strong_median_log_z;
  double weak_slope = 0.0;
  double strong_slope = 0.0;
  /// slope(weak) > slope(strong)
  bool ordered = false;

  nlohmann::json to_json() const {
    return {{"schema_version", kSchemaVersion},
            {"tool_version", tool_version()},
            {"kind", "dichotomy_report"},
            {"weak_config", weak_config.to_json()},
            {"strong_config", strong_config.to_json()},
            {"weak_median_log_z", weak_median_log_z},
            {"strong_median_log_z", strong_median_log_z},
            {"weak_slope", weak_slope},
            {"strong_slope", strong_slope},
            {"ordered", ordered}};
  }
};

inline DichotomyVerdict dichotomy_report(const EnsembleSummary& weak, const EnsembleSummary& strong) {
  if (weak.config.depth != strong.config.depth ||
      weak.config.replicates != strong.config.replicates)
    throw ConfigError("dichotomy_report needs equal depth and replicate counts");
  DichotomyVerdict v;
  v.weak_config = weak.config;
  v.strong_config = strong.config;
  for (const auto& row : weak.rows) v.weak_median_log_z.push_back(row.log_z.q50);
  for (const auto& row : strong.rows) v.strong_median_log_z.push_back(row.log_z.q50);
  v.weak_slope = median_log_z_slope(weak);
  v.strong_slope = median_log_z_slope(strong);
  v.ordered = v.weak_slope > v.strong_slope;
  return v;
}

struct SenetaHeydeRow {
  int depth = 0;
  std::size_t valid = 0;
  double valid_fraction = 0.0;
  double median_ratio = std::nan("");
  double distance = std::nan("");  // |median ratio - c|
};

struct SenetaHeydeReport {
  EnsembleConfig config;
  double target = 0.0;
  std::vector<SenetaHeydeRow> rows;

  nlohmann::json to_json() const {
    nlohmann::json depths = nlohmann::json::array();
    for (const auto& r : rows)
      depths.push_back({{"k", r.depth},
                        {"valid", r.valid},
                        {"valid_fraction", r.valid_fraction},
                        {"median_ratio", r.median_ratio},
                        {"distance", r.distance}});
    return {{"schema_version", kSchemaVersion},
            {"tool_version", tool_version()},
            {"kind", "seneta_heyde_report"},
            {"config", config.to_json()},
            {"target_c", target},
            {"depths", depths}};
  }
};

/// R_k = sqrt(k) Z_k / D_k over the replicates with D_k > 0, at each depth in
/// `depths` (each <= config.depth), against c = sqrt(2 / (pi sigma^2)).
inline SenetaHeydeReport seneta_heyde_report(const EnsembleConfig& config,
                                             const std::vector<int>& depths) {
  if (classify(config.spec) != Regime::Critical)
    throw RegimeError("seneta_heyde_report requires critical disorder");
  SenetaHeydeReport report;
  report.config = config;
  report.target = seneta_heyde_constant(config.spec);
  const auto summary = run_ensemble(config);
  for (int k : depths) {
    if (k < 1 || k > config.depth) throw ConfigError("report depth outside ensemble depth");
    const auto& row = summary.rows[static_cast<std::size_t>(k)];
    SenetaHeydeRow out;
    out.depth = k;
    out.valid = row.ratio.count;
    out.valid_fraction = static_cast<double>(row.ratio.count) / config.replicates;
    out.median_ratio = row.ratio.q50;
    out.distance = std::abs(row.ratio.q50 - report.target);
    report.rows.push_back(out);
  }
  return report;
}

namespace detail {

/// End positions of `paths` draws from one environment's prob_n.
inline std::vector<int> sample_end_positions(const PolymerSampler& sampler, std::uint64_t stream_seed,
                                             std::size_t paths) {
  std::vector<int> ends(paths);
  const std::size_t blocks = (paths + kPathsPerStream - 1) / kPathsPerStream;
  parallel_for(blocks, [&](std::size_t b) {
    CounterStream rng(stream_seed, b);
    const std::size_t end = std::min(paths, (b + 1) * kPathsPerStream);
    for (std::size_t p = b * kPathsPerStream; p < end; ++p) ends[p] = sampler.sample_end(rng);
  });
  return ends;
}

inline std::uint64_t path_stream_seed(const EnsembleConfig& config, std::size_t env) {
  return mix_seed(config.base_seed ^ kPathStreamSalt, env);
}

}  // namespace detail

struct CltReport {
  EnsembleConfig config;
  std::size_t paths_per_env = 0;
  std::vector<double> ks;      // continuity-corrected, per environment
  std::vector<double> raw_ks;  // plain KS on the lattice data, per environment
  double median_ks = 0.0;
  double median_raw_ks = 0.0;

  nlohmann::json to_json() const {
    return {{"schema_version", kSchemaVersion},
            {"tool_version", tool_version()},
            {"kind", "clt_report"},
            {"config", config.to_json()},
            {"paths_per_env", paths_per_env},
            {"ks", ks},
            {"raw_ks", raw_ks},
            {"median_ks", median_ks},
            {"median_raw_ks", median_raw_ks}};
  }
};

/// KS distance of (s)_n / sqrt(n) under prob_n to the standard normal, one
/// value per environment. config.depth is n, config.replicates the number of
/// environments.
inline CltReport clt_report(const EnsembleConfig& config, std::size_t paths_per_env) {
  if (classify(config.spec) != Regime::Weak)
    throw RegimeError("clt_report requires weak disorder");
  if (paths_per_env < 2) throw ConfigError("clt_report needs at least two paths");
  CltReport report;
  report.config = config;
  report.paths_per_env = paths_per_env;
  const int n = config.depth;
  const double scale = std::sqrt(static_cast<double>(n));
  for (int e = 0; e < config.replicates; ++e) {
    const auto env = static_cast<std::size_t>(e);
    const PolymerSampler sampler(WeightOracle(config.replicate_seed(env), config.spec), n);
    const auto ends = detail::sample_end_positions(sampler, detail::path_stream_seed(config, env),
                                                   paths_per_env);
    std::vector<double> x(ends.size());
    for (std::size_t i = 0; i < ends.size(); ++i) x[i] = ends[i] / scale;
    // (s)_n has the parity of n and moves in steps of 2.
    report.ks.push_back(lattice_ks_statistic(x, -n / scale, 2.0 / scale, standard_normal_cdf));
    report.raw_ks.push_back(ks_statistic(x, standard_normal_cdf));
  }
  report.median_ks = median(report.ks);
  report.median_raw_ks = median(report.raw_ks);
  return report;
}

struct VarianceReport {
  EnsembleConfig config;
  std::size_t paths_per_env = 0;
  double target = 1.0;                 // asymptotic_variance(beta), 1 for the control
  std::vector<double> sampled;         // sample Var((s)_n)/n per environment
  std::vector<double> sampled_stderr;  // its standard error
  std::vector<double> exact;           // Var_{prob_n}((s)_n)/n per environment
  double median_sampled = 0.0;
  double median_exact = 0.0;
  double gap = 0.0;  // median_exact - target

  nlohmann::json to_json() const {
    return {{"schema_version", kSchemaVersion},
            {"tool_version", tool_version()},
            {"kind", "variance_report"},
            {"config", config.to_json()},
            {"paths_per_env", paths_per_env},
            {"target", target},
            {"sampled", sampled},
            {"sampled_stderr", sampled_stderr},
            {"exact", exact},
            {"median_sampled", median_sampled},
            {"median_exact", median_exact},
            {"gap", gap}};
  }
};

/// Var((s)_n)/n under prob_n per environment, sampled from paths_per_env
/// paths and computed exactly from the sampler's end-position law, next to
/// the conjectured asymptotic variance. Lognormal beta >= beta_c, or the
/// Deterministic control (target 1).
inline VarianceReport variance_report(const EnsembleConfig& config, std::size_t paths_per_env) {
  VarianceReport report;
  if (config.spec.is_lognormal()) {
    detail::require_strong(config.spec.beta(), "variance_report");
    report.target = asymptotic_variance(config.spec.beta());
  } else if (!config.spec.is_deterministic()) {
    throw RegimeError("variance_report requires lognormal strong disorder or the deterministic control");
  }
  if (paths_per_env < 2) throw ConfigError("variance_report needs at least two paths");
  report.config = config;
  report.paths_per_env = paths_per_env;
  const int n = config.depth;
  for (int e = 0; e < config.replicates; ++e) {
    const auto env = static_cast<std::size_t>(e);
    const PolymerSampler sampler(WeightOracle(config.replicate_seed(env), config.spec), n);
    const auto ends = detail::sample_end_positions(sampler, detail::path_stream_seed(config, env),
                                                   paths_per_env);
    double mean = 0.0;
    for (int x : ends) mean += x;
    mean /= static_cast<double>(ends.size());
    double m2 = 0.0, m4 = 0.0;
    for (int x : ends) {
      const double c = x - mean;
      m2 += c * c;
      m4 += c * c * c * c;
    }
    const double count = static_cast<double>(ends.size());
    const double var = m2 / (count - 1.0);
    // Var of the sample variance ~ (mu4 - sigma^4) / N.
    const double var_of_var = std::max(m4 / count - var * var, 0.0) / count;
    report.sampled.push_back(var / n);
    report.sampled_stderr.push_back(std::sqrt(var_of_var) / n);

    const auto law = sampler.end_position_law();
    double em = 0.0, em2 = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      const double x = 2.0 * static_cast<double>(i) - n;
      em += law[i] * x;
      em2 += law[i] * x * x;
    }
    report.exact.push_back((em2 - em * em) / n);
  }
  report.median_sampled = median(report.sampled);
  report.median_exact = median(report.exact);
  report.gap = report.median_exact - report.target;
  return report;
}

}  // namespace treepoly
