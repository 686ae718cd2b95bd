#pragma once

// Mean-one cascade weight laws and their disorder parameters.
//
// Every family is parameterized so that E[X] = 1 holds analytically:
//   Lognormal(beta)   X = exp(beta*Z - beta^2/2), Z standard normal
//   TwoPoint(a, p)    X = a w.p. p, X = b = (1 - p*a)/(1 - p) otherwise
//   Deterministic     X = 1
// The regime (weak / critical / strong) is decided by E[X ln X] against the
// binary branching rate ln 2.

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>

#include "json.hpp"
#include "treepoly/error.hpp"

namespace treepoly {

struct Lognormal {
  double beta;
};

struct TwoPoint {
  double a;
  double p;

  double high() const { return (1.0 - p * a) / (1.0 - p); }
};

struct Deterministic {};

class DisorderSpec {
 public:
  using Law = std::variant<Lognormal, TwoPoint, Deterministic>;

  DisorderSpec() : law_(Deterministic{}) {}
  DisorderSpec(Lognormal law) : law_(law) { validate(); }
  DisorderSpec(TwoPoint law) : law_(law) { validate(); }
  DisorderSpec(Deterministic law) : law_(law) {}

  static DisorderSpec lognormal(double beta) { return DisorderSpec(Lognormal{beta}); }
  static DisorderSpec two_point(double a, double p) { return DisorderSpec(TwoPoint{a, p}); }
  static DisorderSpec deterministic() { return DisorderSpec(Deterministic{}); }

  const Law& law() const { return law_; }

  bool is_lognormal() const { return std::holds_alternative<Lognormal>(law_); }
  bool is_deterministic() const { return std::holds_alternative<Deterministic>(law_); }

  /// beta of a Lognormal spec; ConfigError otherwise.
  double beta() const {
    if (const auto* ln = std::get_if<Lognormal>(&law_)) return ln->beta;
    throw ConfigError("spec is not lognormal");
  }

  std::string_view kind_name() const {
    return std::visit(
        [](const auto& law) -> std::string_view {
          using T = std::decay_t<decltype(law)>;
          if constexpr (std::is_same_v<T, Lognormal>) return "lognormal";
          else if constexpr (std::is_same_v<T, TwoPoint>) return "twopoint";
          else return "deterministic";
        },
        law_);
  }

  friend bool operator==(const DisorderSpec& a, const DisorderSpec& b) {
    return a.to_json() == b.to_json();
  }

  nlohmann::json to_json() const {
    return std::visit(
        [](const auto& law) -> nlohmann::json {
          using T = std::decay_t<decltype(law)>;
          if constexpr (std::is_same_v<T, Lognormal>)
            return {{"kind", "lognormal"}, {"beta", law.beta}};
          else if constexpr (std::is_same_v<T, TwoPoint>)
            return {{"kind", "twopoint"}, {"a", law.a}, {"p", law.p}};
          else
            return {{"kind", "deterministic"}};
        },
        law_);
  }

  static DisorderSpec from_json(const nlohmann::json& j) {
    try {
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "lognormal") return lognormal(j.at("beta").get<double>());
      if (kind == "twopoint") return two_point(j.at("a").get<double>(), j.at("p").get<double>());
      if (kind == "deterministic") return deterministic();
      throw ConfigError("unknown disorder kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad disorder spec: ") + e.what());
    }
  }

 private:
  void validate() const {
    if (const auto* ln = std::get_if<Lognormal>(&law_)) {
      if (!(ln->beta > 0.0) || !std::isfinite(ln->beta))
        throw ConfigError("lognormal beta must be a positive finite number");
    } else if (const auto* tp = std::get_if<TwoPoint>(&law_)) {
      if (!(tp->a > 0.0 && tp->a < 1.0) || !(tp->p > 0.0 && tp->p < 1.0))
        throw ConfigError("two-point parameters need a in (0,1) and p in (0,1)");
    }
  }

  Law law_;
};

enum class Regime { Weak, Critical, Strong };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Weak: return "weak";
    case Regime::Critical: return "critical";
    case Regime::Strong: return "strong";
  }
  return "?";
}

inline constexpr double kLn2 = std::numbers::ln2;

/// Absolute tolerance on the analytic E[X ln X] for the critical class.
inline constexpr double kCriticalTolerance = 1e-12;

/// beta_c = sqrt(2 ln 2), the lognormal critical point.
inline double critical_beta() { return std::sqrt(2.0 * kLn2); }

/// E[X] in closed form; 1 for every family.
inline double mean_weight(const DisorderSpec& spec) {
  return std::visit(
      [](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, TwoPoint>)
          return law.p * law.a + (1.0 - law.p) * law.high();
        else
          return 1.0;
      },
      spec.law());
}

/// E[X ln X].
inline double disorder_parameter(const DisorderSpec& spec) {
  return std::visit(
      [](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, Lognormal>) {
          return 0.5 * law.beta * law.beta;
        } else if constexpr (std::is_same_v<T, TwoPoint>) {
          const double b = law.high();
          return law.p * law.a * std::log(law.a) + (1.0 - law.p) * b * std::log(b);
        } else {
          return 0.0;
        }
      },
      spec.law());
}

inline Regime classify(const DisorderSpec& spec) {
  const double gap = disorder_parameter(spec) - kLn2;
  if (std::abs(gap) <= kCriticalTolerance) return Regime::Critical;
  return gap < 0.0 ? Regime::Weak : Regime::Strong;
}

/// E[X (ln X)^2] - (E[X ln X])^2. Zero for Deterministic.
inline double sigma_squared(const DisorderSpec& spec) {
  return std::visit(
      [](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, Lognormal>) {
          return law.beta * law.beta;
        } else if constexpr (std::is_same_v<T, TwoPoint>) {
          const double b = law.high();
          const double la = std::log(law.a);
          const double lb = std::log(b);
          const double m1 = law.p * law.a * la + (1.0 - law.p) * b * lb;
          const double m2 = law.p * law.a * la * la + (1.0 - law.p) * b * lb * lb;
          return m2 - m1 * m1;
        } else {
          return 0.0;
        }
      },
      spec.law());
}

/// sigma^2, or DegenerateDisorderError when it vanishes.
inline double positive_sigma_squared(const DisorderSpec& spec) {
  const double s2 = sigma_squared(spec);
  if (!(s2 > 0.0))
    throw DegenerateDisorderError("sigma^2 = 0 for " + std::string(spec.kind_name()) +
                                  " disorder");
  return s2;
}

/// c = sqrt(2 / (pi sigma^2)), the Seneta-Heyde limit of sqrt(n) Z_n / D_n.
inline double seneta_heyde_constant(const DisorderSpec& spec) {
  return std::sqrt(2.0 / (std::numbers::pi * positive_sigma_squared(spec)));
}

/// Maps two independent uniforms to two independent draws of ln X. The
/// lognormal family uses both Box-Muller branches (cosine for the first
/// output, sine for the second); the two-point family uses one uniform each.
class LogWeightSampler {
 public:
  explicit LogWeightSampler(const DisorderSpec& spec) {
    std::visit(
        [this](const auto& law) {
          using T = std::decay_t<decltype(law)>;
          if constexpr (std::is_same_v<T, Lognormal>) {
            kind_ = Kind::Lognormal;
            beta_ = law.beta;
            shift_ = 0.5 * law.beta * law.beta;
          } else if constexpr (std::is_same_v<T, TwoPoint>) {
            kind_ = Kind::TwoPoint;
            p_ = law.p;
            log_low_ = std::log(law.a);
            log_high_ = std::log(law.high());
          } else {
            kind_ = Kind::Deterministic;
          }
        },
        spec.law());
  }

  bool trivial() const { return kind_ == Kind::Deterministic; }

  /// u1 in (0,1], u2 in [0,1).
  [[gnu::always_inline]] std::pair<double, double> operator()(double u1, double u2) const {
    switch (kind_) {
      case Kind::Lognormal: {
        const double radius = beta_ * std::sqrt(-2.0 * std::log(u1));
        double sine = 0.0;
        double cosine = 0.0;
        sincos_of(2.0 * std::numbers::pi * u2, sine, cosine);
        return {radius * cosine - shift_, radius * sine - shift_};
      }
      case Kind::TwoPoint:
        // P(u <= p) = p on both (0,1] and [0,1) up to 2^-53.
        return {u1 <= p_ ? log_low_ : log_high_, u2 <= p_ ? log_low_ : log_high_};
      case Kind::Deterministic:
        break;
    }
    return {0.0, 0.0};
  }

 private:
  static void sincos_of(double angle, double& sine, double& cosine) {
#if defined(__GNUC__)
    __builtin_sincos(angle, &sine, &cosine);
#else
    sine = std::sin(angle);
    cosine = std::cos(angle);
#endif
  }

  enum class Kind { Lognormal, TwoPoint, Deterministic };
  Kind kind_ = Kind::Deterministic;
  double beta_ = 0.0;
  double shift_ = 0.0;
  double p_ = 0.0;
  double log_low_ = 0.0;
  double log_high_ = 0.0;
};

}  // namespace treepoly
