#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>

namespace treepoly {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
    else comp_ += (x - t) + sum_;
    sum_ = t;
  }
  void scale(double factor) {
    sum_ *= factor;
    comp_ *= factor;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Streaming accumulator of sum_i exp(log_term_i) together with the signed
/// sum_i coeff_i * exp(log_term_i), both held relative to a common running
/// scale exp(shift). The scale follows the running maximum of log_term, so no
/// partial sum overflows however large or small the terms are.
class ScaledSum {
 public:
  void add(double log_term, double coeff) {
    if (log_term > shift_) rescale(log_term);
    const double w = std::exp(log_term - shift_);
    positive_.add(w);
    signed_.add(coeff * w);
  }

  void add(double log_term) {
    if (log_term > shift_) rescale(log_term);
    positive_.add(std::exp(log_term - shift_));
  }

  /// Folds `other` into this sum (order-sensitive in floating point).
  void merge(const ScaledSum& other) {
    if (other.empty()) return;
    if (other.shift_ > shift_) rescale(other.shift_);
    const double f = std::exp(other.shift_ - shift_);
    positive_.add(other.positive_.value() * f);
    signed_.add(other.signed_.value() * f);
  }

  bool empty() const { return shift_ == -std::numeric_limits<double>::infinity(); }
  double shift() const { return shift_; }
  /// sum exp(log_term) = positive() * exp(shift()).
  double positive() const { return positive_.value(); }
  /// sum coeff*exp(log_term) = signed_part() * exp(shift()).
  double signed_part() const { return signed_.value(); }

  double log_positive() const { return shift_ + std::log(positive_.value()); }

 private:
  void rescale(double new_shift) {
    if (!empty()) {
      const double f = std::exp(shift_ - new_shift);
      positive_.scale(f);
      signed_.scale(f);
    }
    shift_ = new_shift;
  }

  double shift_ = -std::numeric_limits<double>::infinity();
  CompensatedSum positive_;
  CompensatedSum signed_;
};

/// log(sum exp(x_i)); -inf for an empty span.
inline double log_sum_exp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  CompensatedSum s;
  for (double x : xs) s.add(std::exp(x - hi));
  return hi + std::log(s.value());
}

/// log(exp(a) + exp(b)).
inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

/// ln cosh x without overflow: |x| + log1p(exp(-2|x|)) - ln 2, switching to
/// log1p(2 sinh^2(x/2)) near zero where that form loses relative accuracy.
inline double log_cosh(double x) {
  const double ax = std::abs(x);
  if (ax < 1.0) {
    const double s = std::sinh(0.5 * ax);
    return std::log1p(2.0 * s * s);
  }
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::numbers::ln2;
}

}  // namespace treepoly
