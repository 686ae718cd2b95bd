#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "treepoly/cascade.hpp"
#include "treepoly/disorder.hpp"

namespace treepoly {
namespace {

const double kBetaC = std::sqrt(2.0 * std::numbers::ln2);

// E[g(X)] for X = exp(beta Z - beta^2/2), integrated over the normal density.
template <class G>
double lognormal_expectation(double beta, G g) {
  // The integrand is negligible beyond |z| = 40 for the betas used here.
  auto integrand = [&](double z) {
    const double log_x = beta * z - 0.5 * beta * beta;
    return g(std::exp(log_x), log_x) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -40.0, 40.0, 15,
                                                                        1e-13);
}

TEST(Disorder, CriticalBeta) {
  EXPECT_DOUBLE_EQ(critical_beta(), std::sqrt(2.0 * std::log(2.0)));
  EXPECT_NEAR(critical_beta(), 1.1774100226, 1e-10);
  EXPECT_NEAR(disorder_parameter(DisorderSpec::lognormal(critical_beta())), std::log(2.0), 1e-15);
  EXPECT_EQ(classify(DisorderSpec::lognormal(critical_beta())), Regime::Critical);
}

TEST(Disorder, ParameterClosedForms) {
  EXPECT_EQ(disorder_parameter(DisorderSpec::deterministic()), 0.0);
  EXPECT_NEAR(disorder_parameter(DisorderSpec::lognormal(kBetaC)), 0.693147180559945, 1e-14);
  EXPECT_NEAR(disorder_parameter(DisorderSpec::lognormal(0.5 * kBetaC)), std::log(2.0) / 4, 1e-15);
}

TEST(Disorder, ParameterMatchesQuadrature) {
  for (double beta : {0.3, 0.5 * kBetaC, 1.0, kBetaC, 2.0 * kBetaC}) {
    const double quad = lognormal_expectation(beta, [](double x, double lx) { return x * lx; });
    const double closed = disorder_parameter(DisorderSpec::lognormal(beta));
    EXPECT_NEAR(closed, quad, 1e-8 * std::abs(quad)) << "beta=" << beta;
    const double mean = lognormal_expectation(beta, [](double x, double) { return x; });
    EXPECT_NEAR(mean, 1.0, 1e-10);
  }
}

TEST(Disorder, TwoPointDirectSummation) {
  for (auto [a, p] : {std::pair{0.1, 0.5}, std::pair{0.5, 0.2}, std::pair{0.01, 0.9}}) {
    const auto spec = DisorderSpec::two_point(a, p);
    const double b = (1.0 - p * a) / (1.0 - p);
    const double direct = p * (a * std::log(a)) + (1 - p) * (b * std::log(b));
    EXPECT_NEAR(disorder_parameter(spec), direct, 1e-8 * std::abs(direct));
    EXPECT_NEAR(mean_weight(spec), 1.0, 1e-15);
    const double m2 = p * a * std::log(a) * std::log(a) + (1 - p) * b * std::log(b) * std::log(b);
    EXPECT_NEAR(sigma_squared(spec), m2 - direct * direct, 1e-12);
  }
}

TEST(Disorder, ClassifyExamples) {
  EXPECT_EQ(classify(DisorderSpec::deterministic()), Regime::Weak);
  EXPECT_EQ(classify(DisorderSpec::lognormal(2 * kBetaC)), Regime::Strong);
  EXPECT_EQ(classify(DisorderSpec::lognormal(0.5 * kBetaC)), Regime::Weak);
}

TEST(Disorder, ClassifyMonotoneInBeta) {
  int last = -1;
  for (int i = 1; i <= 100; ++i) {
    const double beta = 3.0 * kBetaC * i / 100.0;
    const int rank = static_cast<int>(classify(DisorderSpec::lognormal(beta)));
    EXPECT_GE(rank, last) << "beta=" << beta;
    if (beta < kBetaC * (1 - 1e-9)) {
      EXPECT_EQ(rank, 0);
    }
    if (beta > kBetaC * (1 + 1e-9)) {
      EXPECT_EQ(rank, 2);
    }
    last = rank;
  }
}

TEST(Disorder, SigmaSquared) {
  EXPECT_DOUBLE_EQ(sigma_squared(DisorderSpec::lognormal(1.0)), 1.0);
  EXPECT_NEAR(sigma_squared(DisorderSpec::lognormal(kBetaC)), 2 * std::log(2.0), 1e-15);
  EXPECT_EQ(sigma_squared(DisorderSpec::deterministic()), 0.0);
  for (double beta : {1.0, kBetaC}) {
    const double m1 = lognormal_expectation(beta, [](double x, double lx) { return x * lx; });
    const double m2 = lognormal_expectation(beta, [](double x, double lx) { return x * lx * lx; });
    EXPECT_NEAR(sigma_squared(DisorderSpec::lognormal(beta)), m2 - m1 * m1, 1e-8);
  }
}

TEST(Disorder, SenetaHeydeConstant) {
  EXPECT_NEAR(seneta_heyde_constant(DisorderSpec::lognormal(kBetaC)),
              std::sqrt(2.0 / (std::numbers::pi * 2 * std::log(2.0))), 1e-15);
  EXPECT_NEAR(seneta_heyde_constant(DisorderSpec::lognormal(kBetaC)), 0.6777, 5e-5);
  EXPECT_NEAR(seneta_heyde_constant(DisorderSpec::lognormal(std::sqrt(2.0 / std::numbers::pi))),
              1.0, 1e-15);
  EXPECT_THROW(seneta_heyde_constant(DisorderSpec::deterministic()), DegenerateDisorderError);
  EXPECT_THROW(positive_sigma_squared(DisorderSpec::deterministic()), DegenerateDisorderError);
}

TEST(Disorder, InvalidParameters) {
  EXPECT_THROW(DisorderSpec::lognormal(0.0), ConfigError);
  EXPECT_THROW(DisorderSpec::lognormal(-1.0), ConfigError);
  EXPECT_THROW(DisorderSpec::two_point(1.5, 0.5), ConfigError);
  EXPECT_THROW(DisorderSpec::two_point(0.5, 1.0), ConfigError);
}

TEST(Disorder, JsonRoundTrip) {
  for (const auto& spec : {DisorderSpec::lognormal(1.25), DisorderSpec::two_point(0.1, 0.5),
                           DisorderSpec::deterministic()}) {
    EXPECT_EQ(DisorderSpec::from_json(nlohmann::json::parse(spec.to_json().dump())), spec);
  }
  EXPECT_THROW(DisorderSpec::from_json(nlohmann::json{{"kind", "gamma"}}), ConfigError);
  EXPECT_THROW(DisorderSpec::from_json(nlohmann::json{{"kind", "lognormal"}}), ConfigError);
}

// 10^6 sampled weights: sample mean within 5 standard errors of 1.
TEST(Disorder, SampleMeanIsOne) {
  for (const auto& spec : {DisorderSpec::lognormal(0.5 * kBetaC), DisorderSpec::lognormal(kBetaC),
                           DisorderSpec::two_point(0.1, 0.5), DisorderSpec::deterministic()}) {
    const WeightOracle oracle(77, spec);
    const int pairs = 500000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < pairs; ++i) {
      for (double lw : oracle.child_log_weights(Vertex(static_cast<std::uint64_t>(i), 20))) {
        const double x = std::exp(lw);
        sum += x;
        sum_sq += x * x;
      }
    }
    const double n = 2.0 * pairs;
    const double mean = sum / n;
    const double se = std::sqrt(std::max(sum_sq / n - mean * mean, 0.0) / n);
    EXPECT_LE(std::abs(mean - 1.0), 5 * se + 1e-15) << spec.to_json().dump();
  }
}

}  // namespace
}  // namespace treepoly
