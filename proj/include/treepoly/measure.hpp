#pragma once

// Polymer measures on the boundary of the binary tree, represented through
// their values on the depth-m rectangles Delta_m(v) = {s : s|m = v}.
//
//   prob_n(Delta_m(v)) = Z_n^{-1} W(v) Z_{n-m}(v)          (m <= n)
//                      = Z_n^{-1} W(v|n) 2^{-(m-n)}         (m > n)
// with W(v) = prod_{j<=m} X_{v|j} 2^{-m}, and the infinite-volume estimate
//   prob_inf(Delta_m(v)) ~ D_N(v) W(v) / sum_{|u|=m} D_N(u) W(u)
// at a user-chosen depth N standing in for the a.s. limit D_inf.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "treepoly/cascade.hpp"
#include "treepoly/log_sum.hpp"
#include "treepoly/philox.hpp"

namespace treepoly {

/// Largest level allowed in a character's index set.
inline constexpr int kCharacterCap = 12;
/// Largest depth for which PolymerSampler materializes its table.
inline constexpr int kSamplerCap = 24;

enum class Provenance { FiniteVolume, InfiniteVolumeEstimate };

inline std::string_view to_string(Provenance p) {
  return p == Provenance::FiniteVolume ? "finite_volume" : "infinite_volume_estimate";
}

/// A probability vector over the 2^m depth-m rectangles, indexed by the
/// canonical vertex index.
struct RestrictedMeasure {
  int depth = 0;
  Provenance provenance = Provenance::FiniteVolume;
  int volume = 0;  // n for prob_n, N for the prob_inf estimate
  std::uint64_t seed = 0;
  std::vector<double> probabilities;
  /// Z_n for prob_n; sum_u D_N(u) W(u) for the prob_inf estimate.
  double normalizer = 1.0;

  double at(const Vertex& v) const {
    if (v.depth() != depth) throw ConfigError("vertex depth does not match measure depth");
    return probabilities[v.index()];
  }

  double total() const {
    CompensatedSum s;
    for (double p : probabilities) s.add(p);
    return s.value();
  }

  /// The same measure one level up: sibling pairs summed.
  RestrictedMeasure coarsen() const {
    if (depth == 0) throw ConfigError("cannot coarsen a depth-0 measure");
    RestrictedMeasure out = *this;
    out.depth = depth - 1;
    out.probabilities.assign(std::size_t{1} << out.depth, 0.0);
    for (std::size_t i = 0; i < out.probabilities.size(); ++i)
      out.probabilities[i] = probabilities[2 * i] + probabilities[2 * i + 1];
    return out;
  }
};

namespace detail {

/// sum_{j<=m} ln X_{u|j} for every u at depth m, in canonical order.
inline std::vector<double> prefix_log_weights(const WeightOracle& oracle, int m) {
  std::vector<double> out(std::size_t{1} << m, 0.0);
  for_each_descendant(oracle, Vertex::root(), m, 0.0, [&](int level, const Vertex& node, double cum) {
    if (level == m) out[node.index()] = cum;
  });
  return out;
}

}  // namespace detail

/// prob_n(Delta_m(v)) for a single rectangle.
inline double prob_n_rectangle(const WeightOracle& oracle, int n, const Vertex& v) {
  const int m = v.depth();
  if (n < 1 || m < 1) throw ConfigError("prob_n_rectangle needs n >= 1 and |v| >= 1");
  oracle.check_depth(std::max(n, m), "prob_n_rectangle");
  const double log_zn = log_partition_function(oracle, Vertex::root(), n);
  if (m <= n) {
    const double log_sub = log_partition_function(oracle, v, n - m);
    return std::exp(oracle.prefix_log_weight(v) - m * kLn2 + log_sub - log_zn);
  }
  return std::exp(oracle.prefix_log_weight(v.prefix(n)) - m * kLn2 - log_zn);
}

/// prob_n restricted to depth m, all 2^m rectangles at once.
inline RestrictedMeasure restricted_measure_n(const WeightOracle& oracle, int n, int m) {
  if (n < 1 || m < 0) throw ConfigError("restricted_measure_n needs n >= 1 and m >= 0");
  oracle.check_depth(std::max(n, m), "restricted_measure_n");
  const int head = std::min(n, m);
  const auto prefix = detail::prefix_log_weights(oracle, head);
  std::vector<double> log_mass(prefix.size());
  for (std::size_t u = 0; u < prefix.size(); ++u) {
    const Vertex vertex(u, head);
    log_mass[u] = prefix[u] - head * kLn2 + log_partition_function(oracle, vertex, n - head);
  }
  const double log_zn = log_sum_exp(log_mass);

  RestrictedMeasure out;
  out.depth = m;
  out.provenance = Provenance::FiniteVolume;
  out.volume = n;
  out.seed = oracle.seed();
  out.normalizer = std::exp(log_zn);
  // Below depth n the density is constant on Delta_n(u): split evenly.
  const int extra = m - head;
  out.probabilities.resize(std::size_t{1} << m);
  for (std::size_t u = 0; u < log_mass.size(); ++u) {
    const double p = std::ldexp(std::exp(log_mass[u] - log_zn), -extra);
    for (std::size_t t = 0; t < (std::size_t{1} << extra); ++t)
      out.probabilities[(u << extra) | t] = p;
  }
  return out;
}

/// Self-normalized signed weights: p_u = w_u / sum w, w_u = coeff_u e^{log_mass_u}.
/// Returns {probabilities, log_scale, scaled normalizer}; the normalizer is
/// sum w = scaled * e^{log_scale}. NonpositiveNormalizerError if sum w <= 0.
struct SelfNormalized {
  std::vector<double> probabilities;
  double log_scale;
  double scaled_normalizer;
};

inline SelfNormalized self_normalize(std::span<const double> log_mass,
                                     std::span<const double> coeff) {
  if (log_mass.size() != coeff.size() || log_mass.empty())
    throw ConfigError("self_normalize: size mismatch");
  const double top = *std::max_element(log_mass.begin(), log_mass.end());
  std::vector<double> w(log_mass.size());
  CompensatedSum total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = coeff[i] * std::exp(log_mass[i] - top);
    total.add(w[i]);
  }
  const double s = total.value();
  if (!(s > 0.0))
    throw NonpositiveNormalizerError(
        "derivative-martingale normalizer is not positive; increase N", s * std::exp(top));
  for (double& x : w) x /= s;
  return {std::move(w), top, s};
}

/// prob_inf estimate restricted to depth m, with D_N in place of D_inf.
inline RestrictedMeasure restricted_measure_inf(const WeightOracle& oracle, int m, int big_n) {
  if (m < 1 || big_n < 1) throw ConfigError("restricted_measure_inf needs m >= 1 and N >= 1");
  oracle.check_depth(m + big_n, "restricted_measure_inf");
  const auto prefix = detail::prefix_log_weights(oracle, m);
  std::vector<double> log_mass(prefix.size());
  std::vector<double> coeff(prefix.size());
  for (std::size_t u = 0; u < prefix.size(); ++u) {
    const auto sums = subtree_sums(oracle, Vertex(u, m), big_n);
    log_mass[u] = prefix[u] + sums.log_scale;
    coeff[u] = sums.d;
  }
  auto normalized = self_normalize(log_mass, coeff);

  RestrictedMeasure out;
  out.depth = m;
  out.provenance = Provenance::InfiniteVolumeEstimate;
  out.volume = big_n;
  out.seed = oracle.seed();
  out.normalizer = std::ldexp(normalized.scaled_normalizer * std::exp(normalized.log_scale), -m);
  out.probabilities = std::move(normalized.probabilities);
  return out;
}

inline double prob_inf_rectangle(const WeightOracle& oracle, const Vertex& v, int big_n) {
  return restricted_measure_inf(oracle, v.depth(), big_n).at(v);
}

/// chi_F(s) = prod_{j in F} s_j, a continuous character of the boundary group.
class Character {
 public:
  Character() = default;

  explicit Character(const std::vector<int>& levels) {
    for (int j : levels) {
      if (j < 1) throw ConfigError("character levels must be positive");
      if (j > kCharacterCap)
        throw DepthLimitError("character level " + std::to_string(j) + " exceeds cap " +
                              std::to_string(kCharacterCap));
    }
    std::set<int> unique(levels.begin(), levels.end());
    levels_.assign(unique.begin(), unique.end());
  }

  const std::vector<int>& levels() const { return levels_; }
  bool trivial() const { return levels_.empty(); }
  /// max F, or 0 for the trivial character.
  int max_level() const { return levels_.empty() ? 0 : levels_.back(); }

  int value(const Vertex& v) const {
    int out = 1;
    for (int j : levels_) out *= v.step(j);
    return out;
  }

  std::string to_string() const {
    std::string out = "{";
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(levels_[i]);
    }
    return out + "}";
  }

 private:
  std::vector<int> levels_;
};

/// E chi_F under a restricted measure of depth >= max F.
inline double character_expectation(const RestrictedMeasure& measure, const Character& f) {
  if (measure.depth < f.max_level()) throw ConfigError("measure too shallow for character");
  CompensatedSum s;
  for (std::size_t u = 0; u < measure.probabilities.size(); ++u)
    s.add(f.value(Vertex(u, measure.depth)) * measure.probabilities[u]);
  return s.value();
}

inline double character_expectation_n(const WeightOracle& oracle, int n, const Character& f) {
  if (f.trivial()) return 1.0;
  if (n <= f.max_level()) throw ConfigError("character_expectation_n needs n > max F");
  return character_expectation(restricted_measure_n(oracle, n, f.max_level()), f);
}

inline double character_expectation_inf(const WeightOracle& oracle, const Character& f, int big_n) {
  if (f.trivial()) return 1.0;
  return character_expectation(restricted_measure_inf(oracle, f.max_level(), big_n), f);
}

/// One polymer path s|n and its polygonal positions (s)_0..(s)_n.
struct PathSample {
  std::vector<int> steps;
  std::vector<int> positions;

  int end() const { return positions.back(); }
  Vertex vertex() const { return Vertex::from_steps(steps); }
};

/// Exact sampler for prob_n. Materializes, for every vertex u with
/// 1 <= |u| <= n, the log of X_u Z_{n-|u|}(u); a path then steps from v to
/// v*e with probability proportional to that quantity at v*e.
class PolymerSampler {
 public:
  PolymerSampler(const WeightOracle& oracle, int n) : n_(n) {
    if (n < 1) throw ConfigError("sampler depth must be >= 1");
    oracle.check_depth(n, "path sampler");
    if (n > kSamplerCap)
      throw DepthLimitError("sampler depth " + std::to_string(n) + " exceeds cap " +
                            std::to_string(kSamplerCap));
    mass_.resize(static_cast<std::size_t>(n) + 1);
    for (int level = 1; level <= n; ++level) {
      auto& row = mass_[static_cast<std::size_t>(level)];
      row.resize(std::size_t{1} << level);
      const std::size_t parents = row.size() / 2;
      parallel_for((parents + kBlock - 1) / kBlock, [&](std::size_t b) {
        const std::size_t end = std::min(parents, (b + 1) * kBlock);
        for (std::size_t p = b * kBlock; p < end; ++p) {
          const auto pair = oracle.child_log_weights(p, level - 1);
          row[2 * p] = pair[0];
          row[2 * p + 1] = pair[1];
        }
      });
    }
    for (int level = n - 1; level >= 1; --level) {
      auto& row = mass_[static_cast<std::size_t>(level)];
      const auto& below = mass_[static_cast<std::size_t>(level) + 1];
      for (std::size_t u = 0; u < row.size(); ++u)
        row[u] += log_add_exp(below[2 * u], below[2 * u + 1]) - kLn2;
    }
    log_zn_ = log_add_exp(mass_[1][0], mass_[1][1]) - kLn2;
  }

  int depth() const { return n_; }
  double log_partition() const { return log_zn_; }

  /// P(step to v*(+1) | at v), v at depth k < n given by its index.
  double plus_probability(std::uint64_t index, int k) const {
    const auto& row = mass_[static_cast<std::size_t>(k) + 1];
    const double gap = row[2 * index + 1] - row[2 * index];
    return 1.0 / (1.0 + std::exp(gap));
  }

  template <class Stream>
  PathSample sample(Stream& rng) const {
    PathSample path;
    path.steps.reserve(static_cast<std::size_t>(n_));
    path.positions.reserve(static_cast<std::size_t>(n_) + 1);
    path.positions.push_back(0);
    std::uint64_t index = 0;
    for (int k = 0; k < n_; ++k) {
      const bool plus = rng.uniform() < plus_probability(index, k);
      path.steps.push_back(plus ? +1 : -1);
      path.positions.push_back(path.positions.back() + path.steps.back());
      index = (index << 1) | (plus ? 0u : 1u);
    }
    return path;
  }

  /// End position of one path, without materializing the path.
  template <class Stream>
  int sample_end(Stream& rng) const {
    std::uint64_t index = 0;
    int position = 0;
    for (int k = 0; k < n_; ++k) {
      const bool plus = rng.uniform() < plus_probability(index, k);
      position += plus ? 1 : -1;
      index = (index << 1) | (plus ? 0u : 1u);
    }
    return position;
  }

  /// Exact law of (s)_n under prob_n; entry i is P((s)_n = 2i - n).
  std::vector<double> end_position_law() const {
    std::vector<double> prob{1.0};
    std::vector<double> next;
    for (int k = 0; k < n_; ++k) {
      next.assign(prob.size() * 2, 0.0);
      for (std::size_t u = 0; u < prob.size(); ++u) {
        const double p = plus_probability(u, k);
        next[2 * u] = prob[u] * p;
        next[2 * u + 1] = prob[u] * (1.0 - p);
      }
      prob.swap(next);
    }
    std::vector<double> law(static_cast<std::size_t>(n_) + 1, 0.0);
    for (std::size_t leaf = 0; leaf < prob.size(); ++leaf) {
      const int minus_steps = std::popcount(static_cast<std::uint64_t>(leaf));
      law[static_cast<std::size_t>(n_ - minus_steps)] += prob[leaf];
    }
    return law;
  }

 private:
  static constexpr std::size_t kBlock = 4096;

  int n_;
  std::vector<std::vector<double>> mass_;
  double log_zn_ = 0.0;
};

/// One exact draw from prob_n. Builds a PolymerSampler; reuse one directly
/// when drawing many paths from the same environment.
template <class Stream>
PathSample sample_path(const WeightOracle& oracle, int n, Stream& rng) {
  return PolymerSampler(oracle, n).sample(rng);
}

}  // namespace treepoly
