#pragma once

// Laplace rates F(r) = lim (1/n) ln E_{prob_n} exp(r (s)_n) for lognormal
// disorder X = exp(beta Z - beta^2/2) at strong disorder (beta >= beta_c):
//
//   F(r) = r tanh(r h) + beta^2 h - beta beta_c,
// where h = h(r) > 0 solves
//   g(h) = beta^2 h^2 + 2 r h tanh(r h) - 2 ln cosh(r h) - beta_c^2 = 0.
//
// g(0) = -beta_c^2 < 0 and g'(h) = 2 beta^2 h + 2 r^2 h sech^2(r h) > 0 for
// h > 0, so the positive root is unique and any sign-change bracket holds it.
// Under weak disorder the rate is ln cosh r.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "treepoly/cascade.hpp"
#include "treepoly/disorder.hpp"
#include "treepoly/error.hpp"
#include "treepoly/log_sum.hpp"

namespace treepoly {

inline constexpr double kResidualTolerance = 1e-12;

namespace detail {

inline void require_strong(double beta, const char* what) {
  if (!(beta >= critical_beta()))
    throw RegimeError(std::string(what) + ": beta = " + std::to_string(beta) +
                      " is below beta_c; the implicit equation holds only for beta >= beta_c");
}

}  // namespace detail

/// g(h) for the given beta and r.
inline double h_equation(double beta, double r, double h) {
  const double x = r * h;
  const double bc = critical_beta();
  return beta * beta * h * h + 2.0 * x * std::tanh(x) - 2.0 * log_cosh(x) - bc * bc;
}

inline double h_equation_slope(double beta, double r, double h) {
  const double sech = 1.0 / std::cosh(r * h);
  return 2.0 * beta * beta * h + 2.0 * r * r * h * sech * sech;
}

/// Positive root of g. `guess`, when given, seeds the bracket search.
inline double solve_h(double beta, double r, std::optional<double> guess = std::nullopt) {
  detail::require_strong(beta, "solve_h");
  if (!std::isfinite(r)) throw ConfigError("solve_h: r must be finite");
  // At r = 0 the equation reads beta^2 h^2 = beta_c^2.
  if (r == 0.0) return critical_beta() / beta;
  auto g = [&](double h) { return h_equation(beta, r, h); };

  double lo = 0.0;
  double hi = std::max(2.0 * critical_beta() / beta, 1.0);
  if (guess && *guess > 0.0) {
    // Narrow bracket around a warm start when it straddles the root.
    const double a = 0.5 * *guess;
    const double b = 2.0 * *guess;
    if (g(a) < 0.0 && g(b) > 0.0) {
      lo = a;
      hi = b;
    }
  }
  for (int expand = 0; g(hi) <= 0.0; ++expand) {
    if (expand > 200) throw NumericError("solve_h: no sign change while expanding bracket");
    lo = hi;
    hi *= 2.0;
  }

  // Safeguarded Newton: fall back to bisection when a step leaves the bracket.
  double h = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double value = g(h);
    if (value == 0.0) return h;
    if (value < 0.0) lo = h;
    else hi = h;
    if (std::abs(value) <= 1e-15 * std::max(1.0, beta * beta * h * h) || hi - lo <= 1e-16 * hi)
      break;
    const double step = h - value / h_equation_slope(beta, r, h);
    h = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
  }
  if (!(std::abs(g(h)) <= kResidualTolerance))
    throw NumericError("solve_h: residual " + std::to_string(g(h)) + " above tolerance");
  return h;
}

/// Number of sign changes of g on a uniform grid over (0, upper] with the
/// given spacing. Diagnostic for the uniqueness of the root.
inline int count_sign_changes(double beta, double r, double upper, double spacing) {
  int changes = 0;
  double previous = h_equation(beta, r, 0.0);
  const auto steps = static_cast<long>(std::ceil(upper / spacing));
  for (long i = 1; i <= steps; ++i) {
    const double value = h_equation(beta, r, i * spacing);
    if ((value > 0.0) != (previous > 0.0)) ++changes;
    previous = value;
  }
  return changes;
}

/// solve_h after a grid scan that rejects an ambiguous (multi-root) bracket.
inline double solve_h_checked(double beta, double r, double spacing = 1e-4) {
  const double h = solve_h(beta, r);
  if (count_sign_changes(beta, r, 2.0 * h + 1.0, spacing) != 1)
    throw NumericError("solve_h: ambiguous root (several sign changes)");
  return h;
}

inline double laplace_rate_at(double beta, double r, double h) {
  return r * std::tanh(r * h) + beta * beta * h - beta * critical_beta();
}

/// F(r) at strong disorder.
inline double laplace_rate(double beta, double r) {
  return laplace_rate_at(beta, r, solve_h(beta, r));
}

/// F'(r) = tanh(r h(r)) (envelope identity of the variational form of F).
inline double laplace_slope(double beta, double r) { return std::tanh(r * solve_h(beta, r)); }

/// ln cosh r.
inline double weak_disorder_rate(double r) { return log_cosh(r); }

/// sigma^2(beta): 1 below beta_c, (2 beta beta_c - beta_c^2) / beta^2 above.
inline double asymptotic_variance(double beta) {
  if (!(beta > 0.0)) throw ConfigError("asymptotic_variance: beta must be positive");
  const double bc = critical_beta();
  if (beta < bc) return 1.0;
  return (2.0 * beta * bc - bc * bc) / (beta * beta);
}

/// Central differences at steps 1e-2, 5e-3, 2.5e-3 with two Richardson levels.
inline double richardson_first_derivative(const std::function<double(double)>& f, double x) {
  auto central = [&](double h) { return (f(x + h) - f(x - h)) / (2.0 * h); };
  const double d1 = central(1e-2), d2 = central(5e-3), d3 = central(2.5e-3);
  const double r1 = (4.0 * d2 - d1) / 3.0, r2 = (4.0 * d3 - d2) / 3.0;
  return (16.0 * r2 - r1) / 15.0;
}

inline double richardson_second_derivative(const std::function<double(double)>& f, double x) {
  const double f0 = f(x);
  auto central = [&](double h) { return (f(x + h) - 2.0 * f0 + f(x - h)) / (h * h); };
  const double d1 = central(1e-2), d2 = central(5e-3), d3 = central(2.5e-3);
  const double r1 = (4.0 * d2 - d1) / 3.0, r2 = (4.0 * d3 - d2) / 3.0;
  return (16.0 * r2 - r1) / 15.0;
}

struct LaplaceCurve {
  double beta = 0.0;
  std::vector<double> r;
  std::vector<double> h;
  std::vector<double> rate;
  /// Grid indices where solve_h failed (h and rate are NaN there).
  std::vector<std::size_t> failures;
  /// Grid indices where the finite-difference slope disagrees with
  /// tanh(r h) by more than kSlopeFlagTolerance.
  std::vector<std::size_t> flagged;

  static constexpr double kSlopeFlagTolerance = 1e-6;
};

/// h and F on `steps` uniform points of [r_min, r_max], each solve warm-started
/// from the previous point's h.
inline LaplaceCurve laplace_curve(double beta, double r_min, double r_max, int steps) {
  detail::require_strong(beta, "laplace_curve");
  if (steps < 2) throw ConfigError("laplace_curve: steps must be >= 2");
  if (!(r_max > r_min)) throw ConfigError("laplace_curve: need r_min < r_max");
  LaplaceCurve curve;
  curve.beta = beta;
  double warm = 0.0;  // 0: no warm start
  for (int i = 0; i < steps; ++i) {
    // Symmetric grids stay exactly symmetric: r_i = -r_{steps-1-i}.
    const double t = static_cast<double>(2 * i - (steps - 1)) / (steps - 1);
    const double r = 0.5 * (r_min + r_max) + 0.5 * (r_max - r_min) * t;
    curve.r.push_back(r);
    try {
      const double h = solve_h(beta, r, warm > 0.0 ? std::optional<double>(warm) : std::nullopt);
      warm = h;
      curve.h.push_back(h);
      curve.rate.push_back(laplace_rate_at(beta, r, h));
      const double fd = richardson_first_derivative([&](double x) { return laplace_rate(beta, x); }, r);
      if (std::abs(fd - std::tanh(r * h)) > LaplaceCurve::kSlopeFlagTolerance)
        curve.flagged.push_back(static_cast<std::size_t>(i));
    } catch (const NumericError&) {
      curve.h.push_back(std::nan(""));
      curve.rate.push_back(std::nan(""));
      curve.failures.push_back(static_cast<std::size_t>(i));
      warm = 0.0;
    }
  }
  return curve;
}

/// (1/n) ln E_{prob_n} exp(r (s)_n), exactly, by one traversal that tilts
/// each leaf's weight by exp(r (s)_n).
inline double empirical_laplace_rate(const WeightOracle& oracle, int n, double r) {
  if (n < 1) throw ConfigError("empirical_laplace_rate needs n >= 1");
  oracle.check_depth(n, "empirical_laplace_rate");
  struct Acc {
    ScaledSum plain;
    ScaledSum tilted;
  };
  auto parts = detail::split_traverse(oracle, Vertex::root(), n, Acc{},
                                      [n, r](Acc& acc, int level, const Vertex& node, double cum) {
                                        if (level != n) return;
                                        acc.plain.add(cum);
                                        acc.tilted.add(cum + r * node.position());
                                      });
  Acc total;
  for (const auto& part : parts) {
    total.plain.merge(part.plain);
    total.tilted.merge(part.tilted);
  }
  return (total.tilted.log_positive() - total.plain.log_positive()) / n;
}

}  // namespace treepoly
