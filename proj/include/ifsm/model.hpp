#pragma once

// Raw model parameters, the reduction to the eps-parametrized normal form,
// admissibility of an extremum and sampled checks of the standing assumptions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ifsm/diagnostics.hpp"
#include "ifsm/error.hpp"
#include "ifsm/grid.hpp"
#include "ifsm/selection.hpp"

namespace ifsm {

struct RawModel {
  double r = 1.0;
  double kappa = 1.0;
  double alpha = 0.1;
  SelectionFunction m;
  double x0 = 0.0;
};

struct NondimModel {
  double eps = 0.0;
  SelectionFunction m;   // normalized: m(0) = m'(0) = 0, |m''(0)| = 1
  double r_tilde = 1.0;  // 1 - m(x0)/r
  double kappa_tilde = 1.0;  // kappa/r: competition in units of the time scale
  double trait_scale = 1.0;  // s = sqrt(r/|m''(x0)|)
  double time_scale = 1.0;   // 1/r
  double curvature_sign = 1.0;
};

inline NondimModel nondimensionalize(const RawModel& raw) {
  require(raw.r > 0.0, ErrorKind::domain, "r must be positive");
  require(raw.kappa > 0.0, ErrorKind::domain, "kappa must be positive");
  require(raw.alpha > 0.0, ErrorKind::domain, "alpha must be positive");
  require(static_cast<bool>(raw.m.value), ErrorKind::domain, "selection function missing");
  const double m2 = raw.m.derivative(2, raw.x0);
  require(std::isfinite(m2), ErrorKind::numeric, "m'' not finite at the extremum");
  // a difference quotient resolves m'' only to O(h^2)
  const double flat = raw.m.d2 ? 1e-12 : 1e-6;
  if (std::abs(m2) < flat) fail(ErrorKind::degenerate_extremum, "m''(x0) = 0 at x0 = " + std::to_string(raw.x0));

  NondimModel out;
  const double s = std::sqrt(raw.r / std::abs(m2));
  const double r = raw.r;
  const double x0 = raw.x0;
  const double mx0 = raw.m(x0);
  out.trait_scale = s;
  out.time_scale = 1.0 / r;
  out.eps = raw.alpha * std::sqrt(std::abs(m2) / r);
  out.r_tilde = 1.0 - mx0 / r;
  out.kappa_tilde = raw.kappa / r;
  out.curvature_sign = m2 > 0.0 ? 1.0 : -1.0;

  const SelectionFunction src = raw.m;
  SelectionFunction& m = out.m;
  m.name = src.name;
  m.value = [src, s, x0, r, mx0](double y) { return (src(s * y + x0) - mx0) / r; };
  m.d1 = [src, s, x0, r](double y) { return s * src.derivative(1, s * y + x0) / r; };
  m.d2 = [src, s, x0, r](double y) { return s * s * src.derivative(2, s * y + x0) / r; };
  m.d3 = [src, s, x0, r](double y) { return s * s * s * src.derivative(3, s * y + x0) / r; };
  m.extremum = 0.0;
  if (src.global_min)
    m.global_min = GlobalMinimum{(src.global_min->value - mx0) / r, (src.global_min->location - x0) / s};
  m.search = Interval{(src.search.lower - x0) / s, (src.search.upper - x0) / s};
  m.even = src.even && x0 == 0.0;
  m.growth_exponent = src.growth_exponent;
  if (src.growth_constant) m.growth_constant = *src.growth_constant * s * s * s / r;

  require(std::abs(m(0.0)) <= 1e-8, ErrorKind::numeric, "normalized m(0) != 0");
  require(std::abs(m.derivative(1, 0.0)) <= 1e-6, ErrorKind::domain, "x0 is not a critical point of m");
  require(std::abs(std::abs(m.derivative(2, 0.0)) - 1.0) <= 1e-8, ErrorKind::numeric, "normalized |m''(0)| != 1");
  return out;
}

struct Admissibility {
  bool admissible = false;
  double margin = 0.0;
  double m_minus = 0.0;
  double m_at_extremum = 0.0;
  double minimizer = 0.0;
};

/// margin = m_- + 1 - m(x_m); the extremum is admissible iff margin > 0.
inline Admissibility check_admissibility(const SelectionFunction& m, double x_m,
                                         std::optional<Interval> search = std::nullopt) {
  const GlobalMinimum gm = global_minimum(m, search);
  Admissibility a;
  a.m_minus = gm.value;
  a.minimizer = gm.location;
  a.m_at_extremum = m(x_m);
  a.margin = gm.value + 1.0 - a.m_at_extremum;
  a.admissible = a.margin > 0.0;
  return a;
}

struct OmegaEtaMass {
  double mass_in_omega = 0.0;
  double bound = 0.0;
  bool violated = false;
};

/// Mass of q on {m <= m_- + 1 + eta} against the lower bound eta/(1+eta)
/// that every steady state must satisfy.
inline OmegaEtaMass omega_eta_mass(const GridDensity& density, const SelectionFunction& m, double eta,
                                   std::optional<double> m_minus = std::nullopt) {
  require(eta > 0.0, ErrorKind::domain, "eta must be positive");
  const GridDensity q = to_frame(density, Frame::q);
  const double mm = m_minus ? *m_minus : global_minimum(m).value;
  const double level = mm + 1.0 + eta;
  OmegaEtaMass out;
  out.mass_in_omega = q.integrate([&](double x) { return m(x) <= level ? 1.0 : 0.0; });
  out.bound = eta / (1.0 + eta);
  out.violated = out.mass_in_omega < out.bound - 1e-6;
  return out;
}

enum class Check { pass, fail, unchecked };

inline const char* to_string(Check c) {
  switch (c) {
    case Check::pass: return "pass";
    case Check::fail: return "fail";
    case Check::unchecked: return "unchecked";
  }
  return "unchecked";
}

struct AssumptionOptions {
  Interval window{-10.0, 10.0};
  std::size_t samples = 4001;
  double delta = 0.1;         // selection-load margin: int m q < 1 - delta
  double delta_prime = 0.25;  // Gaussian tail weight exp(delta' y^2 / eps^2)
};

struct AssumptionReport {
  // h1: normal form and admissible extremum
  Check h1 = Check::unchecked;
  bool normal_form = false;
  double h1_margin = 0.0;
  // h2, h2_prime: polynomial growth of m''' and m''
  Check h2 = Check::unchecked;
  Check h2_prime = Check::unchecked;
  int growth_exponent = 0;
  double growth_constant = 0.0;
  // h3: m >= 0 with other critical values above 1
  Check h3 = Check::unchecked;
  double min_value = 0.0;
  std::vector<double> other_extremum_values;
  // h4: quadratic bounds c_m x^2 <= m, |m''| <= C_m, monotone m' on (x_-, x_+)
  Check h4 = Check::unchecked;
  double C_m = 0.0;
  double c_m = 0.0;
  double x_minus = -std::numeric_limits<double>::infinity();
  double x_plus = std::numeric_limits<double>::infinity();
  bool monotone = false;  // no sign change of m' detected at the sampling resolution
  double resolution = 0.0;
  // h5: int m q < 1 - delta; h6: tail integral (only with a density)
  Check h5 = Check::unchecked;
  double h5_value = 0.0;
  Check h6 = Check::unchecked;
  double h6_value = 0.0;
};

namespace detail {

/// First crossing of {m = level} walking from 0 towards `dir`, refined by bisection.
inline std::optional<double> level_crossing(const SelectionFunction& m, double level, double dir, double limit,
                                            double step) {
  double a = 0.0;
  while (std::abs(a) < limit) {
    const double b = a + dir * step;
    if (m(b) > level) {
      double lo = a, hi = b;
      for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (m(mid) > level ? hi : lo) = mid;
      }
      return 0.5 * (lo + hi);
    }
    a = b;
  }
  return std::nullopt;
}

}  // namespace detail

/// Sampled checks of the standing assumptions on a normalized m; nothing
/// beyond the sampling window is certified.
inline AssumptionReport assumption_report(const SelectionFunction& m, double eps,
                                          const GridDensity* q = nullptr, const AssumptionOptions& opt = {}) {
  AssumptionReport rep;
  const std::size_t n = std::max<std::size_t>(opt.samples, 3);
  const double lo = opt.window.lower, hi = opt.window.upper;
  const double dx = (hi - lo) / static_cast<double>(n - 1);
  rep.resolution = dx;
  std::vector<double> xs(n), v(n), d1(n), d2(n), d3(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = lo + static_cast<double>(i) * dx;
    v[i] = m(xs[i]);
    d1[i] = m.derivative(1, xs[i]);
    d2[i] = m.derivative(2, xs[i]);
    d3[i] = m.derivative(3, xs[i]);
  }

  // normal form and admissibility
  const double m2_0 = m.derivative(2, 0.0);
  rep.normal_form = std::abs(m(0.0)) <= 1e-8 && std::abs(m.derivative(1, 0.0)) <= 1e-6 &&
                    std::abs(std::abs(m2_0) - 1.0) <= 1e-6;
  const Admissibility adm = check_admissibility(m, 0.0, opt.window);
  rep.h1_margin = adm.margin;
  rep.h1 = rep.normal_form && adm.admissible ? Check::pass : Check::fail;

  // growth: smallest p whose ratio |m'''|/(1+|x|^p) does not peak at the window edge
  rep.h2 = Check::fail;
  for (int p = 1; p <= 12; ++p) {
    double amax = 0.0;
    std::size_t imax = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ratio = std::abs(d3[i]) / (1.0 + std::pow(std::abs(xs[i]), p));
      if (ratio > amax) {
        amax = ratio;
        imax = i;
      }
    }
    const bool interior = imax > 0 && imax + 1 < n;
    if (interior || amax == 0.0) {
      rep.growth_exponent = p;
      rep.growth_constant = std::max(amax, std::numeric_limits<double>::min());
      rep.h2 = Check::pass;
      break;
    }
  }
  if (rep.h2 == Check::pass) {
    rep.h2_prime = Check::pass;
    const double a = rep.growth_constant;
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(d2[i]) > 2.0 * a * (1.0 + std::pow(std::abs(xs[i]), rep.growth_exponent + 1)) * (1 + 1e-12))
        rep.h2_prime = Check::fail;
  }

  // nonnegativity: m >= m(0) = 0 and every other critical value above 1
  rep.min_value = *std::min_element(v.begin(), v.end());
  bool h3 = rep.min_value >= -1e-12;
  for (std::size_t i = 1; i < n; ++i) {
    if ((d1[i - 1] < 0.0) != (d1[i] < 0.0) && d1[i] != 0.0) {
      const double xc = 0.5 * (xs[i - 1] + xs[i]);
      if (std::abs(xc) <= dx) continue;
      const double val = m(xc);
      rep.other_extremum_values.push_back(val);
      if (val <= 1.0) h3 = false;
    }
  }
  rep.h3 = h3 ? Check::pass : Check::fail;

  // quadratic bounds and monotonicity
  rep.C_m = 0.0;
  rep.c_m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    rep.C_m = std::max(rep.C_m, std::abs(d2[i]));
    if (std::abs(xs[i]) > 0.5 * dx) rep.c_m = std::min(rep.c_m, v[i] / (xs[i] * xs[i]));
  }
  const auto xm = detail::level_crossing(m, 1.0, -1.0, std::abs(lo), dx);
  const auto xp = detail::level_crossing(m, 1.0, 1.0, std::abs(hi), dx);
  if (xm) rep.x_minus = *xm;
  if (xp) rep.x_plus = *xp;
  rep.monotone = true;
  for (std::size_t i = 1; i < n; ++i) {
    const double a = xs[i - 1], b = xs[i];
    const bool left = a > rep.x_minus && b < 0.0;
    const bool right = a > 0.0 && b < rep.x_plus;
    if (!(left || right)) continue;
    if ((d1[i - 1] > 0.0) != (d1[i] > 0.0) || d1[i] == 0.0) rep.monotone = false;
  }
  const bool curvature = std::abs(m2_0 - 1.0) <= 1e-6;
  if (!curvature || rep.c_m <= 0.0)
    rep.h4 = Check::fail;
  else
    rep.h4 = rep.monotone && xm && xp ? Check::pass : Check::unchecked;
  if (!rep.monotone) rep.h4 = Check::fail;

  if (q != nullptr) {
    GridDensity qq = *q;
    qq.eps = eps;
    const GridDensity qf = to_frame(qq, Frame::q);
    rep.h5_value = qf.integrate([&](double x) { return m(x); });
    rep.h5 = rep.h5_value < 1.0 - opt.delta ? Check::pass : Check::fail;
    try {
      rep.h6_value = tail_exponential_moment(qf, eps, opt.delta_prime);
      rep.h6 = Check::pass;
    } catch (const Error&) {
      rep.h6 = Check::fail;
    }
  }
  return rep;
}

}  // namespace ifsm
