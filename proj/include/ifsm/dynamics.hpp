#pragma once

// Time integration in coefficient space and on grids, the population-size
// equation, and decay-rate fits.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ifsm/error.hpp"
#include "ifsm/grid.hpp"
#include "ifsm/hermite.hpp"
#include "ifsm/operators.hpp"
#include "ifsm/selection.hpp"
#include "ifsm/system.hpp"

namespace ifsm {

enum class RunStatus { completed, blowup };

inline const char* to_string(RunStatus s) { return s == RunStatus::completed ? "completed" : "blowup"; }

struct Snapshot {
  double t = 0.0;
  std::vector<double> values;  // coefficients or grid values
};

struct Trajectory {
  std::vector<double> t;
  std::vector<double> distance;        // ||beta(t)|| against the reference, when given
  std::vector<double> selection_mean;  // int m q (t)
  std::vector<double> first_moment;    // M1(t) in the frame of the state
  std::vector<Snapshot> snapshots;
  double max_mass_drift_rate = 0.0;    // grid only: |mass - 1| per unit time before renormalization
  double max_odd_leakage = 0.0;        // max over time of the largest odd coefficient
  double min_value = 0.0;              // grid only: most negative value seen
  RunStatus status = RunStatus::completed;
  double end_time = 0.0;

  std::size_t size() const { return t.size(); }
};

namespace detail {

inline double odd_leakage(std::span<const double> a) {
  double s = 0.0;
  for (std::size_t k = 1; k < a.size(); k += 2) s = std::max(s, std::abs(a[k]));
  return s;
}

inline double l2_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - (k < b.size() ? b[k] : 0.0);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace detail

struct GalerkinOptions {
  double T = 10.0;
  double h_max = 0.1;
  double guard = 1.0;            // h <= guard / ||alpha||
  double blowup = 1e6;
  std::optional<Coefficients> reference;
  std::size_t snapshot_stride = 0;  // 0: none
};

/// Classical RK4 on the truncated coefficient system with alpha_0 pinned.
inline Trajectory integrate_galerkin(const Coefficients& initial, const SpectralSelectionData& data,
                                     const GalerkinOptions& opt = {}) {
  const std::size_t n = static_cast<std::size_t>(data.max_degree) + 1;
  require(initial.size() == n, ErrorKind::range, "initial coefficients do not match the truncation");
  require(std::abs(initial[0] - 1.0) <= 1e-14, ErrorKind::domain, "alpha_0 must be 1");
  require(opt.T > 0.0 && opt.h_max > 0.0, ErrorKind::domain, "horizon and step must be positive");
  const ProductTable table(data.max_degree);
  auto rhs = [&](const Coefficients& a) { return galerkin_rhs(a, data, table); };

  Trajectory tr;
  Coefficients a = initial;
  a[0] = 1.0;
  auto record = [&](double t, std::size_t step) {
    tr.t.push_back(t);
    if (opt.reference) tr.distance.push_back(detail::l2_diff(a, *opt.reference));
    double sm = 0.0;
    for (std::size_t k = 0; k < n; ++k) sm += a[k] * data.m[k];
    tr.selection_mean.push_back(sm);
    tr.first_moment.push_back(a[1]);
    tr.max_odd_leakage = std::max(tr.max_odd_leakage, detail::odd_leakage(a));
    if (opt.snapshot_stride > 0 && step % opt.snapshot_stride == 0) tr.snapshots.push_back({t, a});
  };

  double t = 0.0;
  std::size_t step = 0;
  record(t, step);
  Coefficients tmp(n);
  while (opt.T - t > 1e-9 * opt.h_max) {
    const double norm = weighted_l2_norm(a);
    if (!(norm <= opt.blowup)) {
      tr.status = RunStatus::blowup;
      break;
    }
    double h = std::min(opt.h_max, opt.guard / norm);
    h = std::min(h, opt.T - t);
    const Coefficients k1 = rhs(a);
    for (std::size_t k = 0; k < n; ++k) tmp[k] = a[k] + 0.5 * h * k1[k];
    const Coefficients k2 = rhs(tmp);
    for (std::size_t k = 0; k < n; ++k) tmp[k] = a[k] + 0.5 * h * k2[k];
    const Coefficients k3 = rhs(tmp);
    for (std::size_t k = 0; k < n; ++k) tmp[k] = a[k] + h * k3[k];
    const Coefficients k4 = rhs(tmp);
    for (std::size_t k = 1; k < n; ++k) a[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    a[0] = 1.0;
    t += h;
    ++step;
    record(t, step);
  }
  if (tr.status == RunStatus::completed && !(weighted_l2_norm(a) <= opt.blowup)) tr.status = RunStatus::blowup;
  tr.end_time = t;
  return tr;
}

struct GridDynamicsOptions {
  double T = 5.0;
  double h_max = 0.1;
  ConvolutionMethod method = ConvolutionMethod::direct;
  /// Reference coefficients; distances use the Hermite projection of N(t) up to their length.
  std::optional<Coefficients> reference;
  int projection_degree = kDefaultTruncation;
  std::size_t snapshot_stride = 0;
  double negativity_tolerance = 1e-10;
};

/// RK4 for dq/dt = T_eps[q] - q - (m - int m q) q with mass renormalized
/// after every step.
inline Trajectory integrate_grid(const GridDensity& q0, const SelectionFunction& m, double eps,
                                 const GridDynamicsOptions& opt = {}) {
  require(eps > 0.0, ErrorKind::domain, "eps must be positive");
  require(opt.T > 0.0 && opt.h_max > 0.0, ErrorKind::domain, "horizon and step must be positive");
  GridDensity q = q0;
  q.eps = eps;
  q = to_frame(q, Frame::q);
  require(q.min_value() >= -opt.negativity_tolerance, ErrorKind::domain, "initial density is negative");
  require(std::abs(q.mass() - 1.0) <= 1e-6, ErrorKind::domain, "initial density must have unit mass");
  require_interior(q);

  const Grid& grid = q.grid;
  const std::size_t n = grid.size;
  const double hx = grid.step;
  const Reproduction op(grid, 0.5 * eps * eps, opt.method);
  std::vector<double> mv(n);
  double mmax = -INFINITY;
  for (std::size_t j = 0; j < n; ++j) {
    mv[j] = m(grid.x(j));
    mmax = std::max(mmax, mv[j]);
  }
  auto mean_m = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += mv[j] * v[j];
    return s * hx;
  };
  std::vector<double> tq(n);
  auto rhs = [&](const std::vector<double>& v, std::vector<double>& out) {
    op.apply(v, tq);
    const double mq = mean_m(v);
    for (std::size_t j = 0; j < n; ++j) out[j] = tq[j] - v[j] - (mv[j] - mq) * v[j];
  };

  Trajectory tr;
  tr.min_value = q.min_value();
  auto record = [&](double t, std::size_t step) {
    tr.t.push_back(t);
    const Coefficients a = project_grid(q, opt.reference ? static_cast<int>(opt.reference->size()) - 1 : opt.projection_degree);
    if (opt.reference) tr.distance.push_back(detail::l2_diff(a, *opt.reference));
    tr.selection_mean.push_back(mean_m(q.values));
    tr.first_moment.push_back(q.integrate([](double x) { return x; }));
    tr.max_odd_leakage = std::max(tr.max_odd_leakage, detail::odd_leakage(a));
    if (opt.snapshot_stride > 0 && step % opt.snapshot_stride == 0) tr.snapshots.push_back({t, q.values});
  };

  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  double t = 0.0;
  std::size_t step = 0;
  record(t, step);
  while (opt.T - t > 1e-9 * opt.h_max) {
    const double mq = mean_m(q.values);
    // positivity: h max(1 + m - int m q) < 1
    const double rate = std::max(1e-300, 1.0 + mmax - mq);
    double h = std::min(opt.h_max, 0.99 / rate);
    h = std::min(h, opt.T - t);
    rhs(q.values, k1);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = q.values[j] + 0.5 * h * k1[j];
    rhs(tmp, k2);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = q.values[j] + 0.5 * h * k2[j];
    rhs(tmp, k3);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = q.values[j] + h * k3[j];
    rhs(tmp, k4);
    double mass = 0.0, lowest = INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      q.values[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
      mass += q.values[j];
      lowest = std::min(lowest, q.values[j]);
    }
    mass *= hx;
    tr.min_value = std::min(tr.min_value, lowest);
    require(lowest >= -opt.negativity_tolerance, ErrorKind::step_size,
            "negative density " + std::to_string(lowest) + " at t = " + std::to_string(t + h));
    require(std::isfinite(mass) && mass > 0.0, ErrorKind::divergence, "grid mass not finite");
    tr.max_mass_drift_rate = std::max(tr.max_mass_drift_rate, std::abs(mass - 1.0) / h);
    for (double& v : q.values) v /= mass;
    require_interior(q);
    t += h;
    ++step;
    record(t, step);
  }
  tr.end_time = t;
  return tr;
}

struct MassState {
  std::vector<double> t;
  std::vector<double> rho;
  double r_tilde = 1.0;
  double kappa = 1.0;

  double final_value() const { return rho.back(); }
};

/// rho' = rho (r~ - s(t)) - kappa rho^2 with s = int m q sampled at `times`
/// (linear in between, constant beyond the last sample); RK4 on the sample grid,
/// refined to steps of at most h_max.
inline MassState integrate_mass(double rho0, const std::vector<double>& times, const std::vector<double>& selection_mean,
                                double r_tilde, double kappa, double T, double h_max = 0.01) {
  require(rho0 > 0.0, ErrorKind::domain, "rho0 must be positive");
  require(!times.empty() && times.size() == selection_mean.size(), ErrorKind::range, "selection trace mismatch");
  require(T > 0.0 && h_max > 0.0, ErrorKind::domain, "horizon and step must be positive");
  auto s_at = [&](double t) {
    if (t <= times.front()) return selection_mean.front();
    if (t >= times.back()) return selection_mean.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin());
    const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return (1.0 - w) * selection_mean[i - 1] + w * selection_mean[i];
  };
  auto f = [&](double t, double r) { return r * (r_tilde - s_at(t)) - kappa * r * r; };
  MassState ms;
  ms.r_tilde = r_tilde;
  ms.kappa = kappa;
  double t = 0.0, r = rho0;
  ms.t.push_back(t);
  ms.rho.push_back(r);
  const auto steps = static_cast<std::size_t>(std::ceil(T / h_max));
  const double h = T / static_cast<double>(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double a = f(t, r);
    const double b = f(t + 0.5 * h, r + 0.5 * h * a);
    const double c = f(t + 0.5 * h, r + 0.5 * h * b);
    const double d = f(t + h, r + h * c);
    r = std::max(0.0, r + h / 6.0 * (a + 2 * b + 2 * c + d));
    t += h;
    ms.t.push_back(t);
    ms.rho.push_back(r);
  }
  return ms;
}

inline MassState integrate_mass(double rho0, double selection_mean, double r_tilde, double kappa, double T,
                                double h_max = 0.01) {
  return integrate_mass(rho0, std::vector<double>{0.0}, std::vector<double>{selection_mean}, r_tilde, kappa, T, h_max);
}

struct DecayFit {
  double lambda = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

struct FitWindow {
  double from = 0.2;  // fractions of the horizon
  double to = 1.0;
};

/// Least-squares slope of log distance over the window; distances must be
/// positive and non-increasing there.
inline DecayFit decay_rate(const std::vector<double>& t, const std::vector<double>& distance, FitWindow window = {}) {
  require(t.size() == distance.size() && t.size() >= 2, ErrorKind::fit, "no distance series to fit");
  const double T = t.back();
  const double a = window.from * T, b = window.to * T;
  std::vector<double> xs, ys;
  double prev = INFINITY;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < a - 1e-12 || t[i] > b + 1e-12) continue;
    const double d = distance[i];
    require(d > 0.0 && std::isfinite(d), ErrorKind::fit, "non-positive distance at t = " + std::to_string(t[i]));
    require(d <= prev * (1.0 + 1e-9), ErrorKind::fit, "distance not monotone at t = " + std::to_string(t[i]));
    prev = d;
    xs.push_back(t[i]);
    ys.push_back(std::log(d));
  }
  require(xs.size() >= 3, ErrorKind::fit, "too few points in the fit window");
  const double nx = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= nx;
  my /= nx;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  DecayFit fit;
  fit.lambda = -sxy / sxx;
  fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  fit.points = xs.size();
  return fit;
}

inline DecayFit decay_rate(const Trajectory& tr, FitWindow window = {}) {
  require(!tr.distance.empty(), ErrorKind::fit, "trajectory has no reference distances");
  return decay_rate(tr.t, tr.distance, window);
}

}  // namespace ifsm
