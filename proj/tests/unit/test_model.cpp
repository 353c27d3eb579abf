#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ifsm/model.hpp"

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

}  // namespace

TEST(Selection, BuiltinsAreInNormalForm) {
  for (const auto& m : {selection::quadratic(), selection::even_quartic(), selection::nonsymmetric()}) {
    EXPECT_NEAR(m(0.0), 0.0, 1e-15) << m.name;
    EXPECT_NEAR(m.derivative(1, 0.0), 0.0, 1e-15) << m.name;
    EXPECT_NEAR(std::abs(m.derivative(2, 0.0)), 1.0, 1e-15) << m.name;
  }
}

TEST(Selection, AnalyticDerivativesMatchDifferences) {
  for (const auto& m : {selection::quadratic(), selection::double_well(3.0), selection::nonsymmetric(0.3)}) {
    for (double x = -3.0; x <= 3.0; x += 0.37) {
      const double h = 1e-4;
      EXPECT_NEAR(m.derivative(1, x), (m(x + h) - m(x - h)) / (2 * h), 1e-6) << m.name << " x=" << x;
      EXPECT_NEAR(m.derivative(2, x), (m.derivative(1, x + h) - m.derivative(1, x - h)) / (2 * h), 1e-6);
      EXPECT_NEAR(m.derivative(3, x), (m.derivative(2, x + h) - m.derivative(2, x - h)) / (2 * h), 1e-6);
    }
  }
}

TEST(Selection, TabulatedSplineReproducesSamples) {
  std::vector<double> x, y;
  for (int i = -40; i <= 40; ++i) {
    x.push_back(0.1 * i);
    y.push_back(0.5 * x.back() * x.back());
  }
  const auto m = selection::tabulated(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(m(x[i]), y[i], 1e-14);
  EXPECT_NEAR(m(0.05), 0.5 * 0.05 * 0.05, 1e-4);
  EXPECT_NEAR(m.derivative(2, 0.0), 1.0, 1e-2);
}

TEST(Selection, UnknownNameIsConfigError) {
  EXPECT_EQ(kind_of([] { selection::by_name("bogus"); }), ErrorKind::config);
  EXPECT_EQ(selection::by_name("double_well", 2.0)(2.0), -0.5 * 4.0 + 16.0 / 16.0);
}

TEST(GlobalMinimum, DoubleWellAgainstGridSearch) {
  auto m = selection::even_quartic();
  m.global_min.reset();
  const auto gm = global_minimum(m, Interval{-10.0, 10.0});
  EXPECT_NEAR(gm.value, -0.25, 1e-12);
  EXPECT_NEAR(std::abs(gm.location), 1.0, 1e-6);
}

TEST(Nondim, AlreadyNormalized) {
  RawModel raw{1.0, 1.0, 0.1, selection::quadratic(), 0.0};
  const auto nd = nondimensionalize(raw);
  EXPECT_NEAR(nd.eps, 0.1, 1e-15);
  EXPECT_NEAR(nd.r_tilde, 1.0, 1e-15);
  for (double y = -3.0; y <= 3.0; y += 0.5) EXPECT_NEAR(nd.m(y), 0.5 * y * y, 1e-14);
}

TEST(Nondim, ShiftedScaledQuadratic) {
  SelectionFunction m;
  m.value = [](double x) { return 2.0 * (x - 1.0) * (x - 1.0); };
  RawModel raw{4.0, 1.0, 0.2, m, 1.0};
  const auto nd = nondimensionalize(raw);
  EXPECT_NEAR(nd.eps, 0.2, 1e-8);
  EXPECT_NEAR(nd.r_tilde, 1.0, 1e-15);
  EXPECT_NEAR(nd.trait_scale, 1.0, 1e-6);
  for (double y = -2.0; y <= 2.0; y += 0.25) EXPECT_NEAR(nd.m(y), 0.5 * y * y, 1e-6);
}

TEST(Nondim, RTildeFromExtremumValue) {
  SelectionFunction m;
  m.value = [](double x) { return 0.5 + 0.5 * x * x; };
  m.d2 = [](double) { return 1.0; };
  const auto nd = nondimensionalize(RawModel{1.0, 1.0, 0.1, m, 0.0});
  EXPECT_NEAR(nd.r_tilde, 0.5, 1e-15);
}

TEST(Nondim, Idempotent) {
  SelectionFunction m;
  m.value = [](double x) { return 3.0 * (x + 0.5) * (x + 0.5) + 0.2; };
  const auto a = nondimensionalize(RawModel{2.0, 1.0, 0.3, m, -0.5});
  const auto b = nondimensionalize(RawModel{1.0, 1.0, a.eps, a.m, 0.0});
  EXPECT_NEAR(b.eps, a.eps, 1e-12);
  EXPECT_NEAR(b.r_tilde, 1.0, 1e-12);
  for (double y = -2.0; y <= 2.0; y += 0.5) EXPECT_NEAR(b.m(y), a.m(y), 1e-12);
}

TEST(Nondim, Errors) {
  SelectionFunction flat;
  flat.value = [](double x) { return x * x * x * x; };
  EXPECT_EQ(kind_of([&] { nondimensionalize(RawModel{1.0, 1.0, 0.1, flat, 0.0}); }), ErrorKind::degenerate_extremum);
  EXPECT_EQ(kind_of([] { nondimensionalize(RawModel{-1.0, 1.0, 0.1, selection::quadratic(), 0.0}); }),
            ErrorKind::domain);
  EXPECT_EQ(kind_of([] { nondimensionalize(RawModel{1.0, 0.0, 0.1, selection::quadratic(), 0.0}); }),
            ErrorKind::domain);
  EXPECT_EQ(kind_of([] { nondimensionalize(RawModel{1.0, 1.0, 0.0, selection::quadratic(), 0.0}); }),
            ErrorKind::domain);
}

TEST(Admissibility, Examples) {
  const auto q = check_admissibility(selection::even_quartic(), 0.0);
  EXPECT_TRUE(q.admissible);
  EXPECT_NEAR(q.margin, 0.75, 1e-12);

  SelectionFunction deep;
  deep.value = [](double x) { return -0.5 * x * x + x * x * x * x / 24.0; };  // minimum -1.5 at +-sqrt(6)
  const auto d = check_admissibility(deep, 0.0, Interval{-10.0, 10.0});
  EXPECT_FALSE(d.admissible);
  EXPECT_NEAR(d.margin, -0.5, 1e-10);

  const auto z = check_admissibility(selection::quadratic(), 0.0);
  EXPECT_TRUE(z.admissible);
  EXPECT_EQ(z.margin, 1.0);
}

TEST(Admissibility, TranslationInvariant) {
  auto base = selection::double_well(1.5);
  base.global_min.reset();
  const double a = check_admissibility(base, 0.0, Interval{-10, 10}).margin;
  SelectionFunction shifted;
  shifted.value = [base](double x) { return base(x) + 7.0; };
  const double b = check_admissibility(shifted, 0.0, Interval{-10, 10}).margin;
  EXPECT_NEAR(a, b, 1e-12);
}

TEST(Admissibility, MissingIntervalIsInsufficientMetadata) {
  SelectionFunction m;
  m.value = [](double x) { return x * x; };
  m.search = Interval{0.0, 0.0};
  EXPECT_EQ(kind_of([&] { check_admissibility(m, 0.0); }), ErrorKind::insufficient_metadata);
}

TEST(OmegaEta, BoundsAndViolation) {
  const double eps = 0.1;
  const auto g = gaussian_on_grid(default_grid(Frame::q, eps), 0.0, eps * eps, Frame::q, eps);
  const auto m = selection::quadratic();
  const auto r = omega_eta_mass(g, m, 1.0);
  EXPECT_EQ(r.bound, 0.5);
  EXPECT_NEAR(r.mass_in_omega, 1.0, 1e-10);
  EXPECT_FALSE(r.violated);

  // all mass near x = 5, where m = 12.5 > m_- + 1 + eta
  const auto far = gaussian_on_grid(Grid::symmetric(1.0, 401).scaled(1.0), 0.0, 0.01, Frame::q, eps);
  GridDensity moved = far;
  moved.grid.lower += 5.0;
  const auto v = omega_eta_mass(moved, m, 0.5);
  EXPECT_NEAR(v.mass_in_omega, 0.0, 1e-15);
  EXPECT_TRUE(v.violated);

  double prev = 0.0;
  for (double eta : {0.1, 1.0, 10.0}) {
    const double b = omega_eta_mass(g, m, eta).bound;
    EXPECT_GT(b, prev);
    prev = b;
  }
  EXPECT_NEAR(prev, 10.0 / 11.0, 1e-15);
}

TEST(Assumptions, Quadratic) {
  const auto rep = assumption_report(selection::quadratic(), 0.1);
  EXPECT_EQ(rep.h1, Check::pass);
  EXPECT_EQ(rep.h3, Check::pass);
  EXPECT_EQ(rep.h4, Check::pass);
  EXPECT_NEAR(rep.c_m, 0.5, 1e-12);
  EXPECT_NEAR(rep.C_m, 1.0, 1e-12);
  // bisection oracle on x^2/2 = 1
  double lo = 0.0, hi = 3.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * mid * mid > 1.0 ? hi : lo) = mid;
  }
  EXPECT_NEAR(rep.x_plus, lo, 1e-12);
  EXPECT_NEAR(rep.x_minus, -lo, 1e-12);
  EXPECT_EQ(rep.h5, Check::unchecked);
}

TEST(Assumptions, EvenQuartic) {
  const auto rep = assumption_report(selection::even_quartic(), 0.1);
  EXPECT_EQ(rep.h1, Check::pass);
  EXPECT_NEAR(rep.h1_margin, 0.75, 1e-12);
  EXPECT_EQ(rep.h3, Check::fail);
  EXPECT_LT(rep.min_value, 0.0);
}

TEST(Assumptions, DensityChecks) {
  const double eps = 0.1;
  const auto g = gaussian_on_grid(default_grid(Frame::q, eps), 0.0, eps * eps, Frame::q, eps);
  const auto rep = assumption_report(selection::quadratic(), eps, &g);
  EXPECT_EQ(rep.h5, Check::pass);
  EXPECT_NEAR(rep.h5_value, eps * eps / 2.0, 1e-10);
  EXPECT_EQ(rep.h6, Check::pass);
  EXPECT_NEAR(rep.h6_value, std::sqrt(2.0), 1e-8);
}
