#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ifsm/hermite.hpp"

using namespace ifsm;

namespace {

// Polynomial P_k with d^k G / dx^k = P_k G, by P_{k+1} = P_k' - x P_k on
// coefficient vectors.
std::vector<double> derivative_polynomial(int k) {
  std::vector<double> p{1.0};
  for (int step = 0; step < k; ++step) {
    std::vector<double> next(p.size() + 1, 0.0);
    for (std::size_t i = 1; i < p.size(); ++i) next[i - 1] += static_cast<double>(i) * p[i];
    for (std::size_t i = 0; i < p.size(); ++i) next[i + 1] -= p[i];
    p = next;
  }
  return p;
}

double horner(const std::vector<double>& p, double x) {
  double s = 0.0;
  for (std::size_t i = p.size(); i-- > 0;) s = s * x + p[i];
  return s;
}

}  // namespace

TEST(GaussianMoment, ClosedFormValues) {
  EXPECT_EQ(gaussian_moment(0), 1.0);
  EXPECT_EQ(gaussian_moment(2), 1.0);
  EXPECT_EQ(gaussian_moment(3), 0.0);
  EXPECT_EQ(gaussian_moment(6), 15.0);
  EXPECT_DOUBLE_EQ(kernel_moment(2), 0.5);
  EXPECT_THROW(gaussian_moment(-1), Error);
}

TEST(GaussianMoment, TableRangeError) {
  const GaussianMoments table(4);
  EXPECT_EQ(table(8), 105.0);
  try {
    table(9);
    FAIL() << "expected range error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::range);
  }
}

TEST(HermiteEval, KnownValues) {
  EXPECT_EQ(hermite_eval(0, 3.7), 1.0);
  EXPECT_EQ(hermite_eval(1, 0.5), 0.5);
  EXPECT_NEAR(hermite_eval(2, 0.0), -1.0 / std::sqrt(2.0), 1e-15);
  const HermiteBasis basis(8);
  EXPECT_THROW(basis.eval(9, 0.0), Error);
}

TEST(HermiteEval, MatchesDerivativeDefinition) {
  for (int k = 0; k <= 8; ++k) {
    const auto p = derivative_polynomial(k);
    const double norm = std::sqrt(std::tgamma(k + 1.0));
    for (double x = -5.0; x <= 5.0; x += 0.125) {
      const double expected = (k % 2 == 0 ? 1.0 : -1.0) * horner(p, x) / norm;
      EXPECT_NEAR(hermite_eval(k, x), expected, 1e-9) << "k=" << k << " x=" << x;
    }
  }
}

TEST(HermiteEval, EvalAllMatchesSingle) {
  std::vector<double> h(20);
  hermite_eval_all(1.7, h);
  for (int k = 0; k < 20; ++k) EXPECT_NEAR(h[static_cast<std::size_t>(k)], hermite_eval(k, 1.7), 1e-13);
}

TEST(Quadrature, WeightsSumToOne) {
  const auto rule = gauss_hermite_rule(128);
  double s = 0.0;
  for (double w : rule.weights) s += w;
  EXPECT_NEAR(s, 1.0, 1e-14);
  EXPECT_EQ(rule.exactness_degree(), 255);
}

TEST(Quadrature, ExactForPolynomialMoments) {
  const auto rule = gauss_hermite_rule(20);
  for (int k = 0; k <= 39; ++k) {
    double s = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      s += rule.weights[i] * std::pow(rule.nodes[i], k);
      scale += rule.weights[i] * std::pow(std::abs(rule.nodes[i]), k);
    }
    EXPECT_NEAR(s, gaussian_moment(k), 1e-12 * std::max(1.0, scale)) << "k=" << k;
  }
}

TEST(Quadrature, OrthonormalityMatrix) {
  const int K = kDefaultTruncation;
  const auto rule = gauss_hermite_rule(128);
  std::vector<double> h(static_cast<std::size_t>(K) + 1);
  std::vector<std::vector<double>> gram(h.size(), std::vector<double>(h.size(), 0.0));
  for (std::size_t i = 0; i < rule.size(); ++i) {
    hermite_eval_all(rule.nodes[i], h);
    for (std::size_t j = 0; j < h.size(); ++j)
      for (std::size_t k = 0; k < h.size(); ++k) gram[j][k] += rule.weights[i] * h[j] * h[k];
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j)
    for (std::size_t k = 0; k < h.size(); ++k) worst = std::max(worst, std::abs(gram[j][k] - (j == k ? 1.0 : 0.0)));
  EXPECT_LE(worst, 1e-10);
}

TEST(Quadrature, SmallRuleIsExactForLowDegree) {
  const auto rule = gauss_hermite_rule(4);
  const auto alpha = project([](double x) { return x * x; }, rule, 4);
  EXPECT_NEAR(alpha[0], 1.0, 1e-14);
  EXPECT_NEAR(alpha[1], 0.0, 1e-14);
  EXPECT_NEAR(alpha[2], std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(alpha[3], 0.0, 1e-14);
}

TEST(Project, BasisFunctionsAndConstants) {
  const auto rule = gauss_hermite_rule(64);
  const auto one = project([](double) { return 1.0; }, rule, 8);
  EXPECT_NEAR(one[0], 1.0, 1e-14);
  for (std::size_t k = 1; k < one.size(); ++k) EXPECT_NEAR(one[k], 0.0, 1e-14);
  const auto h5 = project([](double x) { return hermite_eval(5, x); }, rule, 8);
  for (std::size_t k = 0; k < h5.size(); ++k) EXPECT_NEAR(h5[k], k == 5 ? 1.0 : 0.0, 1e-12);
}

TEST(Project, NonFiniteSampleIsNumericError) {
  const auto rule = gauss_hermite_rule(16);
  try {
    project([](double x) { return x > 0.0 ? std::nan("") : 1.0; }, rule, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
  }
}

TEST(Synthesize, ClenshawValues) {
  const std::vector<double> a{1.0};
  EXPECT_EQ(synthesize(a, 0.3), 1.0);
  const std::vector<double> b{0.0, 1.0};
  EXPECT_NEAR(synthesize(b, 2.0), 2.0, 1e-15);
  const std::vector<double> c{1.0, 0.0, -std::sqrt(2.0) * 0.01};
  EXPECT_NEAR(synthesize(c, 0.0), 1.01, 1e-15);
}

TEST(Synthesize, MatchesDirectSummation) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  std::vector<double> alpha(25);
  for (double& a : alpha) a = nd(rng);
  for (double x = -6.0; x <= 6.0; x += 0.37) {
    double direct = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) direct += alpha[k] * hermite_eval(static_cast<int>(k), x);
    EXPECT_NEAR(synthesize(alpha, x), direct, 1e-10 * std::max(1.0, std::abs(direct)));
  }
}

TEST(Synthesize, ProjectRoundTripOnPolynomials) {
  const int K = 16;
  const auto rule = gauss_hermite_rule(64);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> alpha(static_cast<std::size_t>(K) + 1);
  for (double& a : alpha) a = u(rng);
  const auto back = project([&](double x) { return synthesize(alpha, x); }, rule, K);
  for (std::size_t k = 0; k < alpha.size(); ++k) EXPECT_NEAR(back[k], alpha[k], 1e-12);
}

TEST(WeightedNorm, Pythagoras) {
  EXPECT_EQ(weighted_l2_norm(std::vector<double>{1.0, 0.0}), 1.0);
  EXPECT_EQ(weighted_l2_norm(std::vector<double>{0.0, 3.0, 4.0}), 5.0);
}

TEST(WeightedNorm, MatchesQuadratureNorm) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::vector<double> alpha(16);
  for (double& a : alpha) a = nd(rng);
  const auto rule = gauss_hermite_rule(64);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double v = synthesize(alpha, rule.nodes[i]);
    s += rule.weights[i] * v * v;
  }
  EXPECT_NEAR(weighted_l2_norm(alpha), std::sqrt(s), 1e-10);
}

TEST(WeightedNorm, ParsevalForPolynomials) {
  // f(x) = 1 + x - 2 x^3 + x^6/20, degree 6 <= K/2
  auto f = [](double x) { return 1.0 + x - 2.0 * x * x * x + std::pow(x, 6) / 20.0; };
  const auto rule = gauss_hermite_rule(128);
  const auto alpha = project(f, rule, 12);
  // int f^2 G from exact Gaussian moments
  const std::vector<double> c{1.0, 1.0, 0.0, -2.0, 0.0, 0.0, 0.05};
  double exact = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) exact += c[i] * c[j] * gaussian_moment(static_cast<int>(i + j));
  const double n = weighted_l2_norm(alpha);
  EXPECT_NEAR(n * n, exact, 1e-10);
}
