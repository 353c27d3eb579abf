#pragma once

// Moments in both representations, the coefficient/moment dictionary, frame
// conversion and concentration metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ifsm/error.hpp"
#include "ifsm/grid.hpp"
#include "ifsm/hermite.hpp"

namespace ifsm {

/// M0, M1 and central moments; central[0] = M0 and central[1] = 0 so that
/// central[k] is the k-th central moment for every k.
struct MomentVector {
  Frame frame = Frame::n;
  double eps = 1.0;
  double m0 = 1.0;
  double m1 = 0.0;
  std::vector<double> central;
  std::vector<double> abs_central;  // empty unless requested
  bool tail_warning = false;

  int max_order() const { return static_cast<int>(central.size()) - 1; }

  double operator[](int k) const {
    require(k >= 0 && k <= max_order(), ErrorKind::range, "moment order " + std::to_string(k) + " not stored");
    return central[static_cast<std::size_t>(k)];
  }
};

inline constexpr int kDefaultMomentOrder = 8;

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * static_cast<double>(n - k + i) / static_cast<double>(i);
  return b;
}

/// Grid-rule moments; central moments are summed about M1 directly.
inline MomentVector moments_from_grid(const GridDensity& q, int k_max = kDefaultMomentOrder, bool absolute = false) {
  require(k_max >= 1, ErrorKind::range, "moment order must be >= 1");
  MomentVector out;
  out.frame = q.frame;
  out.eps = q.eps;
  out.m0 = q.mass();
  require(out.m0 > 0.0, ErrorKind::domain, "density has no mass");
  out.m1 = q.integrate([](double x) { return x; }) / out.m0;
  out.central.assign(static_cast<std::size_t>(k_max) + 1, 0.0);
  if (absolute) out.abs_central.assign(out.central.size(), 0.0);
  const double h = q.step();
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double d = q.x(j) - out.m1;
    double p = q.values[j] * h;
    for (std::size_t k = 0; k < out.central.size(); ++k) {
      out.central[k] += p;
      if (absolute) out.abs_central[k] += std::abs(p);
      p *= d;
    }
  }
  out.central[1] = 0.0;
  out.tail_warning = boundary_fraction(q) > 1e-12;
  return out;
}

/// N-frame moments of (sum alpha_k H_k) G from the coefficients alone:
/// M~1 = alpha_1/alpha_0 and, for k >= 2,
/// M~k = alpha_0 sigma_k + sqrt(k!) alpha_k + R(k), where
/// R(k) = sum_{l<k} C(k,l) (-M~1)^{k-l} sum_{j<=l} l!/((l-j)! sqrt(j!)) alpha_j sigma_{l-j}
///      + sum_{0<j<k} k!/((k-j)! sqrt(j!)) alpha_j sigma_{k-j}.
inline MomentVector moments_from_coeffs(std::span<const double> alpha, int k_max = kDefaultMomentOrder) {
  require(!alpha.empty(), ErrorKind::range, "empty coefficient sequence");
  require(k_max >= 1, ErrorKind::range, "moment order must be >= 1");
  auto a = [&](int j) { return j < static_cast<int>(alpha.size()) ? alpha[static_cast<std::size_t>(j)] : 0.0; };
  // l!/((l-j)! sqrt(j!))
  auto weight = [](int l, int j) {
    return std::exp(std::lgamma(l + 1.0) - std::lgamma(l - j + 1.0) - 0.5 * std::lgamma(j + 1.0));
  };
  // int x^l N dx
  auto raw = [&](int l) {
    double s = 0.0;
    for (int j = 0; j <= l; ++j) s += weight(l, j) * a(j) * gaussian_moment(l - j);
    return s;
  };

  MomentVector out;
  out.frame = Frame::n;
  out.m0 = a(0);
  out.m1 = a(1) / a(0);
  out.central.assign(static_cast<std::size_t>(k_max) + 1, 0.0);
  out.central[0] = a(0);
  const double mu = out.m1;
  for (int k = 2; k <= k_max; ++k) {
    double r = 0.0;
    for (int l = 0; l < k; ++l) r += binomial(k, l) * std::pow(-mu, k - l) * raw(l);
    for (int j = 1; j < k; ++j) r += weight(k, j) * a(j) * gaussian_moment(k - j);
    out.central[static_cast<std::size_t>(k)] =
        a(0) * gaussian_moment(k) + std::exp(0.5 * std::lgamma(k + 1.0)) * a(k) + r;
  }
  return out;
}

/// M1 scales by eps, central moments by eps^k (N -> q) or the inverse.
inline MomentVector convert_frame(const MomentVector& m, double eps, Frame target) {
  require(eps > 0.0, ErrorKind::domain, "eps must be positive");
  if (m.frame == target) return m;
  const double f = target == Frame::q ? eps : 1.0 / eps;
  MomentVector out = m;
  out.frame = target;
  out.eps = eps;
  out.m1 = m.m1 * f;
  double p = 1.0;
  for (std::size_t k = 0; k < out.central.size(); ++k) {
    out.central[k] = m.central[k] * p;
    if (k < out.abs_central.size()) out.abs_central[k] = m.abs_central[k] * p;
    p *= f;
  }
  return out;
}

struct ConcentrationRow {
  int k = 0;
  double central = 0.0;   // q-frame M_k
  double gaussian = 0.0;  // eps^k sigma_k
  double ratio = 0.0;     // |M_k - eps^k sigma_k| / eps^{k+2}
};

struct ConcentrationTable {
  double eps = 0.0;
  double first_moment_ratio = 0.0;  // |M1| / eps^2
  std::vector<ConcentrationRow> rows;

  const ConcentrationRow& row(int k) const {
    for (const auto& r : rows)
      if (r.k == k) return r;
    fail(ErrorKind::range, "no concentration row for k = " + std::to_string(k));
  }
};

inline ConcentrationTable concentration_table(const MomentVector& moments, double eps, int k_max) {
  const MomentVector q = convert_frame(moments, eps, Frame::q);
  require(k_max <= q.max_order(), ErrorKind::range, "concentration table beyond stored moments");
  ConcentrationTable t;
  t.eps = eps;
  t.first_moment_ratio = std::abs(q.m1) / (eps * eps);
  for (int k = 2; k <= k_max; ++k) {
    ConcentrationRow r;
    r.k = k;
    r.central = q[k];
    r.gaussian = std::pow(eps, k) * gaussian_moment(k);
    r.ratio = std::abs(r.central - r.gaussian) / std::pow(eps, k + 2);
    t.rows.push_back(r);
  }
  return t;
}

/// sqrt(sum_{k>=2} alpha_k^2), the weighted L2 distance to the tilted Gaussian.
inline double gaussian_distance(std::span<const double> alpha) {
  double s = 0.0;
  for (std::size_t k = 2; k < alpha.size(); ++k) s += alpha[k] * alpha[k];
  return std::sqrt(s);
}

/// int q(y) exp(delta' y^2 / eps^2) dy over a q-frame (or converted) density.
inline double tail_exponential_moment(const GridDensity& density, double eps, double delta_prime) {
  require(delta_prime >= 0.0, ErrorKind::domain, "delta' must be nonnegative");
  GridDensity q = density;
  q.eps = eps;
  q = to_frame(q, Frame::q);
  const double c = delta_prime / (eps * eps);
  std::vector<double> f(q.size());
  double peak = 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double y = q.x(j);
    f[j] = q.values[j] * std::exp(c * y * y);
    require(std::isfinite(f[j]), ErrorKind::overflow, "tail integrand overflows; delta' too large");
    peak = std::max(peak, std::abs(f[j]));
    sum += f[j];
  }
  const std::size_t n = f.size();
  const double edge = std::max({std::abs(f[0]), std::abs(f[1]), std::abs(f[n - 2]), std::abs(f[n - 1])});
  require(edge <= 1e-8 * peak, ErrorKind::overflow, "tail integrand not decaying on the grid; delta' too large");
  return sum * q.step();
}

}  // namespace ifsm
