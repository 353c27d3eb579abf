#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ifsm/dynamics.hpp"
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

Coefficients unit(std::size_t n, std::initializer_list<std::pair<std::size_t, double>> entries) {
  Coefficients a(n, 0.0);
  a[0] = 1.0;
  for (const auto& [k, v] : entries) a[k] = v;
  return a;
}

// right-hand side with the selection term evaluated by quadrature on the
// synthesized function: -(h, m_eps (H_k - alpha_k))_G
Coefficients rhs_by_quadrature(const Coefficients& a, const SelectionFunction& m, double eps) {
  const auto rule = gauss_hermite_rule(160);
  Coefficients out = reproduction_spectral(a, a);
  std::vector<double> h(a.size());
  std::vector<double> sel(a.size(), 0.0);
  double mean = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double x = rule.nodes[i];
    const double f = rule.weights[i] * synthesize(a, x) * m(eps * x);
    hermite_eval_all(x, h);
    for (std::size_t k = 0; k < a.size(); ++k) sel[k] += f * h[k];
    mean += f;
  }
  for (std::size_t k = 0; k < a.size(); ++k) out[k] += -a[k] - (sel[k] - a[k] * mean);
  out[0] = 0.0;
  return out;
}

}  // namespace

TEST(GalerkinRhs, ZeroSelectionGaussianIsStationary) {
  const auto d = selection_data(selection::zero(), 0.1, 16);
  const auto r = galerkin_rhs(unit(17, {}), d);
  for (double v : r) EXPECT_EQ(v, 0.0);
}

TEST(GalerkinRhs, LinearizationOfSecondMode) {
  const auto d = selection_data(selection::zero(), 0.1, 16);
  const double s = 1e-4;
  const double slope = (galerkin_rhs(unit(17, {{2, s}}), d)[2] - galerkin_rhs(unit(17, {{2, -s}}), d)[2]) / (2 * s);
  EXPECT_NEAR(slope, -0.5, 1e-10);
}

TEST(GalerkinRhs, MatchesQuadratureForm) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  for (const auto& m : {selection::quadratic(), selection::nonsymmetric()}) {
    const auto d = selection_data(m, 0.1, 20);
    Coefficients a(21, 0.0);
    a[0] = 1.0;
    for (std::size_t k = 1; k < a.size(); ++k) a[k] = 0.1 * nd(rng) / static_cast<double>(k);
    const auto x = galerkin_rhs(a, d);
    const auto y = rhs_by_quadrature(a, m, 0.1);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(x[k], y[k], 1e-12) << m.name << " k=" << k;
  }
}

TEST(GalerkinRhs, SmallAtSteadyState) {
  for (const auto& m : {selection::quadratic(), selection::even_quartic(), selection::nonsymmetric()}) {
    SteadyProblem p{selection_data(m, 0.1)};
    const auto s = steady_fixed_point(p);
    EXPECT_LE(weighted_l2_norm(galerkin_rhs(s.alpha, p.data)), 10 * std::max(s.residual, 1e-15)) << m.name;
  }
}

TEST(IntegrateGalerkin, SteadyStartStaysPut) {
  SteadyProblem p{selection_data(selection::quadratic(), 0.1)};
  const auto s = steady_fixed_point(p);
  GalerkinOptions opt;
  opt.T = 10.0;
  opt.reference = s.alpha;
  const auto tr = integrate_galerkin(s.alpha, p.data, opt);
  EXPECT_EQ(tr.status, RunStatus::completed);
  EXPECT_LE(tr.distance.back(), 1e-8);
  EXPECT_NEAR(tr.end_time, 10.0, 1e-12);
  EXPECT_EQ(kind_of([&] { decay_rate(tr); }), ErrorKind::fit);
}

TEST(IntegrateGalerkin, SecondModeDecaysAtHalfRate) {
  const auto d = selection_data(selection::zero(), 0.1, 16);
  GalerkinOptions opt;
  opt.T = 10.0;
  opt.snapshot_stride = 1;
  const auto tr = integrate_galerkin(unit(17, {{2, 0.1}}), d, opt);
  std::vector<double> a2;
  for (const auto& snap : tr.snapshots) {
    EXPECT_EQ(snap.values[0], 1.0);
    EXPECT_NEAR(snap.values[2] / (0.1 * std::exp(-0.5 * snap.t)), 1.0, 1e-6);
    a2.push_back(snap.values[2]);
  }
  EXPECT_NEAR(decay_rate(tr.t, a2).lambda, 0.5, 1e-6);
}

TEST(IntegrateGalerkin, ThirdModePerturbationDecays) {
  SteadyProblem p{selection_data(selection::quadratic(), 0.1)};
  const auto s = steady_fixed_point(p);
  auto init = s.alpha;
  init[3] += 0.01;
  GalerkinOptions opt;
  opt.T = 20.0;
  opt.reference = s.alpha;
  const auto tr = integrate_galerkin(init, p.data, opt);
  const auto fit = decay_rate(tr);
  EXPECT_GT(fit.lambda, 0.0);
  EXPECT_LT(tr.distance.back(), tr.distance.front());
}

TEST(IntegrateGalerkin, BlowupGuard) {
  const auto d = selection_data(selection::quadratic(), 0.1, 8);
  GalerkinOptions opt;
  opt.blowup = 1.0;
  const auto tr = integrate_galerkin(unit(9, {{2, 0.5}}), d, opt);
  EXPECT_EQ(tr.status, RunStatus::blowup);
  EXPECT_LT(tr.end_time, opt.T);
}

TEST(IntegrateGalerkin, AlphaZeroMustBeOne) {
  const auto d = selection_data(selection::quadratic(), 0.1, 8);
  auto a = unit(9, {});
  a[0] = 2.0;
  EXPECT_EQ(kind_of([&] { integrate_galerkin(a, d); }), ErrorKind::domain);
}

TEST(IntegrateGrid, GaussianStationaryWithoutSelection) {
  const double eps = 0.1;
  const auto g = gaussian_on_grid(default_grid(Frame::q, eps), 0.0, eps * eps, Frame::q, eps);
  GridDynamicsOptions opt;
  opt.T = 5.0;
  opt.reference = unit(33, {});
  const auto tr = integrate_grid(g, selection::zero(), eps, opt);
  EXPECT_LE(tr.distance.back(), 1e-8);
  EXPECT_LE(std::abs(tr.first_moment.back()), 1e-12);
  EXPECT_LE(tr.max_odd_leakage, 1e-8);
  EXPECT_LE(tr.max_mass_drift_rate, 1e-8);
}

TEST(IntegrateGrid, MeanRelaxesTowardExtremum) {
  const double eps = 0.1;
  const auto g = gaussian_on_grid(default_grid(Frame::q, eps), eps, eps * eps, Frame::q, eps);
  GridDynamicsOptions opt;
  opt.T = 5.0;
  const auto tr = integrate_grid(g, selection::quadratic(), eps, opt);
  for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LT(tr.first_moment[i], tr.first_moment[i - 1]);
  EXPECT_GT(tr.first_moment.back(), 0.0);
  EXPECT_LE(tr.max_mass_drift_rate, 1e-8);
  EXPECT_GE(tr.min_value, -1e-10);
}

TEST(IntegrateGrid, AgreesWithGalerkin) {
  const double eps = 0.1;
  const auto d = selection_data(selection::quadratic(), eps);
  const auto init = unit(33, {{1, 0.03}, {2, 0.05}});
  GalerkinOptions gopt;
  gopt.T = 5.0;
  gopt.snapshot_stride = 1;
  const auto gal = integrate_galerkin(init, d, gopt);
  const auto q0 = to_frame(synthesize_grid(init, default_grid(Frame::n, eps), Frame::n, eps), Frame::q);
  GridDynamicsOptions opt;
  opt.T = 5.0;
  opt.reference = gal.snapshots.back().values;
  const auto grid = integrate_grid(q0, selection::quadratic(), eps, opt);
  EXPECT_LE(grid.distance.back(), 1e-4);
}

TEST(IntegrateGrid, EvenDataKeepsParity) {
  const double eps = 0.1;
  const auto d = selection_data(selection::even_quartic(), eps);
  SteadyProblem p{d};
  const auto s = steady_fixed_point(p);
  auto init = s.alpha;
  init[2] += 0.01;
  init[4] += 0.01;
  const auto q0 = to_frame(synthesize_grid(init, default_grid(Frame::n, eps), Frame::n, eps), Frame::q);
  GridDynamicsOptions opt;
  opt.T = 3.0;
  opt.reference = s.alpha;
  const auto tr = integrate_grid(q0, selection::even_quartic(), eps, opt);
  EXPECT_LE(tr.max_odd_leakage, 1e-10);
  GalerkinOptions gopt;
  gopt.T = 3.0;
  EXPECT_LE(integrate_galerkin(init, d, gopt).max_odd_leakage, 1e-10);
}

TEST(IntegrateGrid, RejectsNegativeData) {
  const double eps = 0.1;
  auto g = gaussian_on_grid(default_grid(Frame::q, eps), 0.0, eps * eps, Frame::q, eps);
  g.values[g.size() / 2 + 5] = -1e-3;
  EXPECT_EQ(kind_of([&] { integrate_grid(g, selection::zero(), eps); }), ErrorKind::domain);
}

TEST(IntegrateMass, LogisticLimits) {
  EXPECT_NEAR(integrate_mass(0.1, 0.0, 1.0, 1.0, 40.0).final_value(), 1.0, 1e-10);
  EXPECT_NEAR(integrate_mass(2.0, 0.5, 1.0, 1.0, 60.0).final_value(), 0.5, 1e-10);
  EXPECT_LT(integrate_mass(1.0, 1.5, 1.0, 1.0, 60.0).final_value(), 1e-10);
  // exact logistic solution with growth g = r - s: rho = g/(k + (g/rho0 - k) e^{-g t})
  const auto ms = integrate_mass(0.2, 0.25, 1.0, 1.0, 3.0);
  const double g = 0.75;
  EXPECT_NEAR(ms.final_value(), g / (1.0 + (g / 0.2 - 1.0) * std::exp(-g * 3.0)), 1e-10);
}

TEST(IntegrateMass, FollowsSelectionTrace) {
  const std::vector<double> t{0.0, 10.0, 20.0};
  const std::vector<double> s{0.0, 0.5, 0.5};
  EXPECT_NEAR(integrate_mass(1.0, t, s, 1.0, 2.0, 80.0).final_value(), 0.25, 1e-8);
}

TEST(DecayRate, ExactExponential) {
  std::vector<double> t, d;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.1 * i);
    d.push_back(std::exp(-0.3 * t.back()));
  }
  const auto fit = decay_rate(t, d);
  EXPECT_NEAR(fit.lambda, 0.3, 1e-6);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
  EXPECT_EQ(fit.points, 81u);
}

TEST(DecayRate, FitErrors) {
  const std::vector<double> t{0.0, 1.0, 2.0, 3.0, 4.0};
  EXPECT_EQ(kind_of([&] { decay_rate(t, {1.0, 0.5, 0.6, 0.2, 0.1}); }), ErrorKind::fit);
  EXPECT_EQ(kind_of([&] { decay_rate(t, {1.0, 0.5, 0.0, 0.0, 0.0}); }), ErrorKind::fit);
  EXPECT_EQ(kind_of([&] { decay_rate({0.0, 1.0}, {1.0, 0.5}); }), ErrorKind::fit);
}
