#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ifsm/diagnostics.hpp"
#include "ifsm/steady.hpp"

using namespace ifsm;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::io;
}

SpectralSelectionData blank_data(int K, double eps) {
  SpectralSelectionData d;
  d.eps = eps;
  d.max_degree = K;
  d.m.assign(static_cast<std::size_t>(K) + 1, 0.0);
  d.matrix = Eigen::MatrixXd::Zero(K + 1, K + 1);
  return d;
}

SteadySolution solve(const SelectionFunction& m, double eps, int K = kDefaultTruncation) {
  SteadyProblem p{selection_data(m, eps, K)};
  return steady_fixed_point(p);
}

}  // namespace

TEST(AssembleL, ZeroSelectionIsDiagonal) {
  const auto d = selection_data(selection::zero(), 0.1, 10);
  const auto L = assemble_L(d);
  ASSERT_EQ(L.rows(), 9);
  for (int i = 0; i < L.rows(); ++i)
    for (int j = 0; j < L.cols(); ++j)
      EXPECT_EQ(L(i, j), i == j ? std::ldexp(1.0, -(i + 1)) - 1.0 : 0.0);
}

TEST(AssembleL, QuadraticEntryAndSymmetry) {
  const double eps = 0.1;
  const auto d = selection_data(selection::quadratic(), eps, 12);
  const auto L = assemble_L(d);
  // M_{2,2} = eps^2 (sigma_6 - 2 sigma_4 + sigma_2)/4 for H_2 = (x^2-1)/sqrt2, m_eps = eps^2 x^2/2
  const double m22 = eps * eps * (15.0 - 2.0 * 3.0 + 1.0) / 4.0;
  EXPECT_NEAR(L(0, 0), -0.5 + eps * eps / 2 - m22, 1e-10);
  EXPECT_LE((L - L.transpose()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SolveL, ZeroSelectionExamples) {
  const auto d = selection_data(selection::zero(), 0.1, 8);
  const LinearPart L(assemble_L(d), measured_k0(d.min_at_nodes));
  Eigen::VectorXd e2 = Eigen::VectorXd::Zero(7), e4 = Eigen::VectorXd::Zero(7);
  e2[0] = 1.0;
  e4[2] = 1.0;
  EXPECT_NEAR(solve_L(L, e2).x[0], -2.0, 1e-14);
  EXPECT_NEAR(solve_L(L, e4).x[2], -8.0 / 7.0, 1e-14);
  EXPECT_NEAR(solve_L(L, e4).x.norm(), 8.0 / 7.0, 1e-14);
}

TEST(SolveL, QuadraticRandomBound) {
  const auto d = selection_data(selection::quadratic(), 0.1);
  const auto k0 = measured_k0(d.min_at_nodes);
  ASSERT_TRUE(k0.has_value());
  EXPECT_EQ(*k0, 0);
  const LinearPart L(assemble_L(d), k0);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd r(d.max_degree - 1);
    for (auto& v : r) v = nd(rng);
    r /= r.norm();
    const auto s = solve_L(L, r);
    EXPECT_LE(s.x.norm(), 4.0);
    EXPECT_TRUE(s.within_bound);
    EXPECT_LE((assemble_L(d) * s.x - r).norm(), 1e-13);
  }
}

TEST(SolveL, SingularIsRejected) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Identity(3, 3);
  L(2, 2) = 0.0;
  EXPECT_EQ(kind_of([&] { LinearPart(L, 0); }), ErrorKind::singular);
}

TEST(MeasuredK0, Definition) {
  EXPECT_EQ(measured_k0(0.0), 0);
  EXPECT_EQ(measured_k0(-0.25), 0);
  EXPECT_EQ(measured_k0(-0.6), 1);
  EXPECT_EQ(measured_k0(-0.8), 2);
  EXPECT_FALSE(measured_k0(-1.0).has_value());
}

TEST(Alpha1, EvenDataGivesZero) {
  const auto d = selection_data(selection::even_quartic(), 0.1);
  Eigen::VectorXd a2 = Eigen::VectorXd::Zero(d.max_degree - 1);
  a2[0] = 0.01;
  a2[2] = -0.003;
  EXPECT_EQ(alpha1_root(a2, d), 0.0);
}

TEST(Alpha1, LinearBranch) {
  const double eps = 0.1;
  auto d = blank_data(4, eps);
  d.D = -2.0 * eps * eps;
  d.matrix(1, 2) = d.matrix(2, 1) = 2.0 * eps * eps * eps;
  Eigen::VectorXd a2 = Eigen::VectorXd::Zero(3);
  a2[0] = 1.0;
  EXPECT_NEAR(alpha1_root(a2, d), -eps, 1e-15);
  d.D = 0.0;
  EXPECT_EQ(kind_of([&] { alpha1_root(a2, d); }), ErrorKind::degenerate_pivot);
}

TEST(Alpha1, NoRealRoot) {
  auto d = blank_data(4, 0.5);
  d.m[1] = 1.0;
  d.matrix(1, 2) = -2.0;
  d.D = 0.1;
  Eigen::VectorXd a2 = Eigen::VectorXd::Zero(3);
  a2[0] = 1.0;
  EXPECT_EQ(kind_of([&] { alpha1_root(a2, d); }), ErrorKind::no_real_root);
}

TEST(Alpha1, NonEvenAgainstBisection) {
  const auto d = selection_data(selection::nonsymmetric(), 0.1);
  const Eigen::VectorXd a2 = Eigen::VectorXd::Zero(d.max_degree - 1);
  const double a1 = alpha1_root(a2, d);
  // f(a) = m1 a^2 + D a - m1, bracketed around the small root
  auto f = [&](double a) { return d.m1() * a * a + d.D * a - d.m1(); };
  double lo = -1.0, hi = 1.0;
  ASSERT_LT(f(lo) * f(hi), 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((f(mid) < 0.0) == (f(lo) < 0.0) ? lo : hi) = mid;
  }
  EXPECT_NEAR(a1, 0.5 * (lo + hi), 1e-12);
  EXPECT_LT(std::abs(a1), 1.0);
}

TEST(QMap, ProductTermOnE2) {
  const auto d = blank_data(8, 0.1);
  const double t = 0.3;
  Eigen::VectorXd a2 = Eigen::VectorXd::Zero(7);
  a2[0] = t;
  const auto q = q_map(a2, 0.0, d);
  // sqrt(4!)/2^4 * t^2/(sqrt(2!) sqrt(2!))
  EXPECT_NEAR(q[2], std::sqrt(24.0) / 16.0 * t * t / 2.0, 1e-16);
  EXPECT_NEAR(q[2] / (t * t), 0.1531, 1e-4);
  for (int i = 0; i < 7; ++i) {
    if (i == 2) continue;
    EXPECT_EQ(q[i], 0.0);
  }
}

TEST(QMap, ZeroForEvenAtOrigin) {
  const auto d = selection_data(selection::even_quartic(), 0.1);
  EXPECT_EQ(q_map(Eigen::VectorXd::Zero(d.max_degree - 1), 0.0, d).norm(), 0.0);
}

TEST(QMap, ValueAtOriginScaling) {
  // Q[0] = c_{2,1} alpha1^2 e_2 - alpha1 M_{1,.}; the second part is O(eps^3),
  // the first is O(eps^2) since alpha1 = O(eps) for non-even m
  std::vector<double> full, linear;
  for (double eps : {0.2, 0.1, 0.05}) {
    const auto d = selection_data(selection::nonsymmetric(), eps);
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(d.max_degree - 1);
    const double a1 = alpha1_root(z, d);
    Eigen::VectorXd q = q_map(z, a1, d);
    full.push_back(q.norm() / (eps * eps));
    q[0] -= ProductTable(2)(2, 1) * a1 * a1;
    linear.push_back(q.norm() / std::pow(eps, 3));
  }
  for (std::size_t i = 1; i < 3; ++i) {
    EXPECT_LT(full[i], 1.5 * full[i - 1]);
    EXPECT_GT(full[i], full[i - 1] / 1.5);
    EXPECT_LT(linear[i], 1.5 * linear[i - 1]);
    EXPECT_GT(linear[i], linear[i - 1] / 1.5);
  }
}

TEST(SteadyFixedPoint, ZeroSelectionIsGaussian) {
  const auto s = solve(selection::zero(), 0.1);
  EXPECT_EQ(s.iterations, 1);
  EXPECT_EQ(s.alpha[0], 1.0);
  for (std::size_t k = 1; k < s.alpha.size(); ++k) EXPECT_EQ(s.alpha[k], 0.0);
  EXPECT_EQ(gaussian_distance(s.alpha), 0.0);
}

TEST(SteadyFixedPoint, QuadraticLeadingBalance) {
  const double eps = 0.05;
  const auto s = solve(selection::quadratic(), eps);
  EXPECT_EQ(s.alpha[0], 1.0);
  EXPECT_EQ(s.alpha1(), 0.0);
  EXPECT_NEAR(s.alpha[2] / (eps * eps), -std::sqrt(2.0), 0.1 * std::sqrt(2.0));
  EXPECT_TRUE(s.certified);
  EXPECT_LE(s.residual, 1e-11);
  EXPECT_EQ(s.k0, 0);
  EXPECT_TRUE(s.l_bound_ok);
}

TEST(SteadyFixedPoint, EvenQuarticKeepsParity) {
  const auto s = solve(selection::even_quartic(), 0.05);
  for (std::size_t k = 1; k < s.alpha.size(); k += 2) EXPECT_LE(std::abs(s.alpha[k]), 1e-10);
  EXPECT_TRUE(s.certified);
}

TEST(SteadyFixedPoint, ResidualAgainstIndependentOperators) {
  for (const auto& m : {selection::quadratic(), selection::even_quartic(), selection::nonsymmetric()}) {
    const auto s = solve(m, 0.1);
    // rebuild the selection data with a different quadrature size
    const auto d = selection_data(m, 0.1, kDefaultTruncation, gauss_hermite_rule(150));
    EXPECT_LE(weighted_l2_norm(galerkin_rhs(s.alpha, d)), 1e-10) << m.name;
  }
}

TEST(SteadyFixedPoint, NeighborhoodConstantBounded) {
  for (const auto& m : {selection::quadratic(), selection::even_quartic(), selection::nonsymmetric()}) {
    std::vector<double> c;
    for (double eps : {0.2, 0.1, 0.05}) c.push_back(solve(m, eps).membership);
    EXPECT_LT(c[2], 2.0 * c[1]) << m.name;
    EXPECT_LT(c[1], 2.0 * c[0]) << m.name;
  }
}

TEST(SteadyFixedPoint, TruncationRobust) {
  const auto a = solve(selection::quadratic(), 0.1, 24);
  const auto b = solve(selection::quadratic(), 0.1, 32);
  EXPECT_LT(std::abs(a.alpha[2] - b.alpha[2]), 1e-10);
}

TEST(SteadyFixedPoint, IterationCapIsDivergence) {
  SteadyProblem p{selection_data(selection::quadratic(), 0.1)};
  p.max_iterations = 2;
  p.tol = 1e-30;
  EXPECT_EQ(kind_of([&] { steady_fixed_point(p); }), ErrorKind::divergence);
}

TEST(SteadyFixedPoint, NeighborhoodCheck) {
  SteadyProblem p{selection_data(selection::quadratic(), 0.1)};
  p.C = 1e-3;
  EXPECT_EQ(kind_of([&] { steady_fixed_point(p); }), ErrorKind::divergence);
}

TEST(SteadyFixedPoint, SteadyMass) {
  const auto s = solve(selection::quadratic(), 0.1);
  EXPECT_NEAR(s.selection_mean, s.alpha[0] * 0.005 + s.alpha[2] * 0.01 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s.steady_mass(), 1.0 - s.selection_mean, 1e-15);
  EXPECT_NEAR(s.steady_mass(1.0, 2.0), 0.5 * (1.0 - s.selection_mean), 1e-15);
}

TEST(GridOracle, ZeroSelectionIsGaussian) {
  const double eps = 0.1;
  const auto r = steady_grid_oracle(selection::zero(), eps);
  const auto g = gaussian_on_grid(r.q.grid, 0.0, eps * eps, Frame::q, eps);
  double d = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) d += std::abs(r.q.values[j] - g.values[j]);
  EXPECT_LE(d * g.step(), 1e-9);
}

TEST(GridOracle, QuadraticVarianceCorrection) {
  const double eps = 0.1;
  const auto r = steady_grid_oracle(selection::quadratic(), eps);
  const auto m = moments_from_grid(r.q, 4);
  EXPECT_LE(std::abs(m[2] - eps * eps), 5 * std::pow(eps, 4));
  EXPECT_NEAR(r.q.mass(), 1.0, 1e-12);
  EXPECT_GE(r.q.min_value(), 0.0);
}

TEST(GridOracle, InadmissibleRefused) {
  EXPECT_EQ(kind_of([] { steady_grid_oracle(selection::double_well(3.0), 0.1); }), ErrorKind::inadmissible);
}

TEST(GridOracle, AgreesWithSpectral) {
  for (const auto& m : {selection::quadratic(), selection::even_quartic()}) {
    const auto r = steady_grid_oracle(m, 0.1);
    EXPECT_LE(oracle_discrepancy(solve(m, 0.1), r.q), 1e-3) << m.name;
  }
}

TEST(GridOracle, NonEvenAgreesWithSpectral) {
  // the mean relaxes at an O(eps^2) rate, so the default cap is too small
  GridOracleOptions opt;
  opt.max_iterations = 2000;
  const auto r = steady_grid_oracle(selection::nonsymmetric(), 0.2, opt);
  EXPECT_LE(oracle_discrepancy(solve(selection::nonsymmetric(), 0.2), r.q), 1e-3);
}
