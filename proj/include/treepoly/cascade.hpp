#pragma once

// One realization of the cascade {X_v : v in T} and the martingales built on
// it: the partition functions Z_k(v), the derivative martingale D_k(v) and the
// Seneta-Heyde ratios sqrt(k) Z_k / D_k.
//
// Weights are never stored. X_v is regenerated on demand from (seed, v) with
// a counter-based generator, so a depth-k traversal needs O(k) memory and any
// subtree can be recomputed consistently.
//
// Derivative martingale. Read the cascade as a branching random walk in the
// boundary case: a vertex u at depth n sits at
//     V(u) = n ln 2 - sum_{j<=n} ln X_{u|j},
// so that sum_{|u|=1} e^{-V(u)} has mean E[X] = 1 and
// sum_{|u|=1} V(u) e^{-V(u)} has mean ln 2 - E[X ln X], which is 0 exactly at
// critical disorder. Then
//     Z_n = sum_{|u|=n} e^{-V(u)},   D_n = sum_{|u|=n} V(u) e^{-V(u)},
// and below a vertex v the positions are measured from v.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "treepoly/disorder.hpp"
#include "treepoly/error.hpp"
#include "treepoly/log_sum.hpp"
#include "treepoly/parallel.hpp"
#include "treepoly/philox.hpp"
#include "treepoly/vertex.hpp"

namespace treepoly {

inline constexpr int kDefaultDepthCap = 26;
inline constexpr int kEnumerationCap = 16;
/// Traversals deeper than this are split into 2^kSplitDepth subtrees that are
/// reduced in canonical vertex order.
inline constexpr int kSplitDepth = 4;

class WeightOracle {
 public:
  WeightOracle(std::uint64_t seed, DisorderSpec spec, int depth_cap = kDefaultDepthCap)
      : seed_(seed), key_(key_from_seed(seed)), spec_(spec), sampler_(spec_), depth_cap_(depth_cap) {
    if (depth_cap < 0 || depth_cap > Vertex::kMaxDepth)
      throw ConfigError("depth cap out of range");
  }

  std::uint64_t seed() const { return seed_; }
  const DisorderSpec& spec() const { return spec_; }
  int depth_cap() const { return depth_cap_; }

  /// {ln X_{p*(+1)}, ln X_{p*(-1)}} from one generator block keyed by p.
  std::array<double, 2> child_log_weights(const Vertex& parent) const {
    return child_log_weights(parent.bits(), parent.depth());
  }

  /// Same, addressed by the parent's raw (bits, depth) encoding.
  std::array<double, 2> child_log_weights(std::uint64_t parent_bits, int parent_depth) const {
    if (sampler_.trivial()) return {0.0, 0.0};
    const auto block = philox4x32({static_cast<std::uint32_t>(parent_bits),
                                   static_cast<std::uint32_t>(parent_bits >> 32),
                                   static_cast<std::uint32_t>(parent_depth), kDomainTag},
                                  key_);
    const auto [plus, minus] = sampler_(to_unit_open_closed(block[0], block[1]),
                                        to_unit_closed_open(block[2], block[3]));
    return {plus, minus};
  }

  double log_weight_at(const Vertex& v) const {
    if (v.is_root()) throw RootVertexError("the root vertex carries no weight");
    return child_log_weights(v.parent())[v.bits() & 1u];
  }

  double weight_at(const Vertex& v) const { return std::exp(log_weight_at(v)); }

  /// sum_{j<=|v|} ln X_{v|j}; 0 at the root.
  double prefix_log_weight(const Vertex& v) const {
    double total = 0.0;
    for (int j = 1; j <= v.depth(); ++j) total += log_weight_at(v.prefix(j));
    return total;
  }

  void check_depth(int depth, const char* what) const {
    if (depth < 0) throw ConfigError(std::string(what) + ": negative depth");
    if (depth > depth_cap_)
      throw DepthLimitError(std::string(what) + ": depth " + std::to_string(depth) +
                            " exceeds cap " + std::to_string(depth_cap_));
  }

 private:
  static constexpr std::uint32_t kDomainTag = 0x54524545u;

  std::uint64_t seed_;
  PhiloxKey key_;
  DisorderSpec spec_;
  LogWeightSampler sampler_;
  int depth_cap_;
};

/// Depth-first walk over every descendant of `root` down to relative depth
/// `depth`, in canonical pre-order. Calls visit(level, node, cum_log) where
/// level is the depth below root (1..depth) and cum_log is base_log plus the
/// log-weights on the path from root to node. Working state is O(depth).
template <class Visit>
void for_each_descendant(const WeightOracle& oracle, const Vertex& root, int depth,
                         double base_log, Visit&& visit) {
  if (depth <= 0) return;
  if (root.depth() + depth > Vertex::kMaxDepth) throw DepthLimitError("traversal too deep");
  std::array<double, Vertex::kMaxDepth + 1> cum{};
  std::array<std::array<double, 2>, Vertex::kMaxDepth + 1> pair{};
  cum[0] = base_log;
  const std::uint64_t leaves = std::uint64_t{1} << depth;
  for (std::uint64_t i = 0; i < leaves; ++i) {
    // Going from leaf i-1 to leaf i only the trailing-zero suffix of i changes.
    const int start = i == 0 ? 1 : depth - std::countr_zero(i);
    for (int level = start; level <= depth; ++level) {
      const std::uint64_t rel = i >> (depth - level);
      const std::uint64_t bits = (root.bits() << level) | rel;
      const bool minus = (rel & 1u) != 0;
      // The minus sibling reuses the pair drawn when its plus sibling was visited.
      if (!minus) pair[level] = oracle.child_log_weights(bits >> 1, root.depth() + level - 1);
      cum[level] = cum[level - 1] + pair[level][minus ? 1 : 0];
      visit(level, Vertex::unchecked(bits, root.depth() + level), cum[level]);
    }
  }
}

namespace detail {

/// Runs `visit` over all descendants of v to relative depth k, splitting the
/// work into a head (levels 1..s, s = min(k, kSplitDepth)) and 2^s chunks
/// (the subtrees under the depth-s descendants). Returns the per-part states
/// in canonical order: [head, chunk_0, ..., chunk_{2^s - 1}] (no chunks when
/// k <= kSplitDepth). visit(state, level_below_v, node, cum_log).
template <class State, class Visit>
std::vector<State> split_traverse(const WeightOracle& oracle, const Vertex& v, int k,
                                  const State& init, Visit visit) {
  std::vector<State> parts;
  const int s = std::min(k, kSplitDepth);
  State head = init;
  std::vector<double> prefix_logs;
  if (k > s) prefix_logs.resize(std::size_t{1} << s);
  for_each_descendant(oracle, v, s, 0.0, [&](int level, const Vertex& node, double cum) {
    visit(head, level, node, cum);
    if (level == s && k > s) prefix_logs[node.bits() & ((std::uint64_t{1} << s) - 1)] = cum;
  });
  parts.push_back(std::move(head));
  if (k == s) return parts;

  const std::size_t chunks = prefix_logs.size();
  parts.resize(1 + chunks, init);
  parallel_for(chunks, [&](std::size_t c) {
    const Vertex u = v.concat(Vertex(c, s));
    State& state = parts[1 + c];
    for_each_descendant(oracle, u, k - s, prefix_logs[c],
                        [&](int level, const Vertex& node, double cum) {
                          visit(state, level + s, node, cum);
                        });
  });
  return parts;
}

}  // namespace detail

/// Z_k(v) and D_k(v) for one subtree, held against a common log scale:
/// Z = z * e^{log_scale}, D = d * e^{log_scale}.
struct SubtreeSums {
  int depth = 0;
  double log_scale = 0.0;
  double z = 1.0;
  double d = 0.0;

  double log_partition() const { return log_scale + std::log(z); }
  double partition() const { return z * std::exp(log_scale); }
  double derivative() const { return d * std::exp(log_scale); }
};

namespace detail {

inline SubtreeSums finish_sums(const ScaledSum& acc, int k) {
  // Leaf weights are e^{L}; e^{-V} = 2^{-k} e^{L}, applied exactly by ldexp.
  return {k, acc.shift(), std::ldexp(acc.positive(), -k), std::ldexp(acc.signed_part(), -k)};
}

}  // namespace detail

/// Z_k(v) and D_k(v) from one streaming traversal of the depth-k subtree.
inline SubtreeSums subtree_sums(const WeightOracle& oracle, const Vertex& v, int k) {
  oracle.check_depth(k, "subtree traversal");
  if (k == 0) return {};
  const double k_ln2 = k * kLn2;
  auto parts = detail::split_traverse(
      oracle, v, k, ScaledSum{}, [k, k_ln2](ScaledSum& acc, int level, const Vertex&, double cum) {
        if (level == k) acc.add(cum, k_ln2 - cum);
      });
  ScaledSum total;
  for (const auto& part : parts) total.merge(part);
  return detail::finish_sums(total, k);
}

/// Z_k(v) = sum_{|t|=k} prod_j X_{(v*t)|j} 2^{-k}; Z_0(v) = 1.
inline double partition_function(const WeightOracle& oracle, const Vertex& v, int k) {
  return subtree_sums(oracle, v, k).partition();
}

inline double log_partition_function(const WeightOracle& oracle, const Vertex& v, int k) {
  return subtree_sums(oracle, v, k).log_partition();
}

/// D_k(v) = sum_{|t|=k} V_v(t) e^{-V_v(t)}; D_0(v) = 0.
inline double derivative_martingale(const WeightOracle& oracle, const Vertex& v, int k) {
  return subtree_sums(oracle, v, k).derivative();
}

/// Z_k, D_k and R_k = sqrt(k) Z_k / D_k for k = 0..depth_max below the root.
/// Index k holds depth k; ratio[k] is empty where D_k <= 0 (and always at k=0).
struct MartingaleSeries {
  int depth_max = 0;
  std::vector<double> log_z;
  std::vector<double> z;
  std::vector<double> d;
  std::vector<std::optional<double>> ratio;
};

/// Per-level sums for all depths 1..n below v from a single traversal.
inline std::vector<SubtreeSums> level_sums(const WeightOracle& oracle, const Vertex& v, int n) {
  oracle.check_depth(n, "martingale series");
  std::vector<SubtreeSums> out(static_cast<std::size_t>(n) + 1);
  out[0] = {};
  if (n == 0) return out;
  auto parts = detail::split_traverse(
      oracle, v, n, std::vector<ScaledSum>(static_cast<std::size_t>(n) + 1),
      [](std::vector<ScaledSum>& acc, int level, const Vertex&, double cum) {
        acc[static_cast<std::size_t>(level)].add(cum, level * kLn2 - cum);
      });
  for (int k = 1; k <= n; ++k) {
    ScaledSum total;
    for (const auto& part : parts) total.merge(part[static_cast<std::size_t>(k)]);
    out[static_cast<std::size_t>(k)] = detail::finish_sums(total, k);
  }
  return out;
}

inline MartingaleSeries martingale_series(const WeightOracle& oracle, int n_max) {
  const auto sums = level_sums(oracle, Vertex::root(), n_max);
  MartingaleSeries series;
  series.depth_max = n_max;
  for (int k = 0; k <= n_max; ++k) {
    const auto& s = sums[static_cast<std::size_t>(k)];
    series.log_z.push_back(s.log_partition());
    series.z.push_back(s.partition());
    series.d.push_back(s.derivative());
    // R_k = sqrt(k) z/d; the common scale cancels.
    if (k > 0 && s.d > 0.0) series.ratio.emplace_back(std::sqrt(static_cast<double>(k)) * s.z / s.d);
    else series.ratio.emplace_back(std::nullopt);
  }
  return series;
}

/// One leaf t below v: the weight product along t and its walk position V_v(t).
struct LeafRow {
  Vertex path;
  double product;
  double position;
};

/// Brute-force list of all 2^k leaves below v, each product formed from
/// individual weight_at lookups. Test oracle; k <= kEnumerationCap.
inline std::vector<LeafRow> enumerate_leaves(const WeightOracle& oracle, const Vertex& v, int k) {
  if (k < 0) throw ConfigError("enumerate_leaves: negative depth");
  if (k > kEnumerationCap)
    throw DepthLimitError("enumerate_leaves: depth " + std::to_string(k) + " exceeds cap " +
                          std::to_string(kEnumerationCap));
  std::vector<LeafRow> rows;
  rows.reserve(std::size_t{1} << k);
  for (std::uint64_t t = 0; t < (std::uint64_t{1} << k); ++t) {
    const Vertex path(t, k);
    double product = 1.0;
    double log_sum = 0.0;
    for (int j = 1; j <= k; ++j) {
      const double lw = oracle.log_weight_at(v.concat(path.prefix(j)));
      product *= std::exp(lw);
      log_sum += lw;
    }
    rows.push_back({path, product, k * kLn2 - log_sum});
  }
  return rows;
}

}  // namespace treepoly
