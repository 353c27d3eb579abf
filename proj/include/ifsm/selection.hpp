#pragma once

// Trait-dependent mortality rates m(x): built-in library, tabulated functions
// and derivative access.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ifsm/error.hpp"

namespace ifsm {

struct Interval {
  double lower = -10.0;
  double upper = 10.0;
};

struct GlobalMinimum {
  double value = 0.0;
  double location = 0.0;
};

using ScalarFunction = std::function<double(double)>;

struct SelectionFunction {
  std::string name;
  ScalarFunction value;
  /// Analytic derivatives; empty entries fall back to central differences.
  ScalarFunction d1, d2, d3;

  double extremum = 0.0;
  std::optional<GlobalMinimum> global_min;
  Interval search{};
  bool even = false;
  /// Declared growth data |m'''(x)| <= A (1 + |x|^p), if known.
  std::optional<int> growth_exponent;
  std::optional<double> growth_constant;

  double operator()(double x) const { return value(x); }

  double derivative(int order, double x) const {
    switch (order) {
      case 0: return value(x);
      case 1:
        if (d1) return d1(x);
        break;
      case 2:
        if (d2) return d2(x);
        break;
      case 3:
        if (d3) return d3(x);
        break;
      default: fail(ErrorKind::range, "derivative order " + std::to_string(order));
    }
    return central_difference(order, x);
  }

 private:
  double central_difference(int order, double x) const {
    const double s = std::max(1.0, std::abs(x));
    switch (order) {
      case 1: {
        const double h = 1e-5 * s;
        return (value(x + h) - value(x - h)) / (2.0 * h);
      }
      case 2: {
        const double h = 1e-4 * s;
        return (value(x + h) - 2.0 * value(x) + value(x - h)) / (h * h);
      }
      default: {
        const double h = 1e-3 * s;
        return (value(x + 2 * h) - 2.0 * value(x + h) + 2.0 * value(x - h) - value(x - 2 * h)) /
               (2.0 * h * h * h);
      }
    }
  }
};

namespace selection {

inline SelectionFunction zero() {
  SelectionFunction m;
  m.name = "zero";
  m.value = [](double) { return 0.0; };
  m.d1 = m.d2 = m.d3 = [](double) { return 0.0; };
  m.global_min = GlobalMinimum{0.0, 0.0};
  m.even = true;
  m.growth_exponent = 1;
  m.growth_constant = 0.0;
  return m;
}

/// x^2/2, the stable normal form.
inline SelectionFunction quadratic() {
  SelectionFunction m;
  m.name = "quadratic";
  m.value = [](double x) { return 0.5 * x * x; };
  m.d1 = [](double x) { return x; };
  m.d2 = [](double) { return 1.0; };
  m.d3 = [](double) { return 0.0; };
  m.global_min = GlobalMinimum{0.0, 0.0};
  m.even = true;
  m.growth_exponent = 1;
  m.growth_constant = 0.0;
  return m;
}

/// -x^2/2 + x^4/(4 w^2): local maximum at 0, minima -w^2/4 at +-w.
/// The central maximum is admissible iff w < 2.
inline SelectionFunction double_well(double w = 3.0) {
  require(w > 0.0, ErrorKind::domain, "double-well width must be positive");
  const double c = 1.0 / (4.0 * w * w);
  SelectionFunction m;
  m.name = "double_well";
  m.value = [c](double x) { return -0.5 * x * x + c * x * x * x * x; };
  m.d1 = [c](double x) { return -x + 4.0 * c * x * x * x; };
  m.d2 = [c](double x) { return -1.0 + 12.0 * c * x * x; };
  m.d3 = [c](double x) { return 24.0 * c * x; };
  m.global_min = GlobalMinimum{-0.25 * w * w, w};
  m.even = true;
  m.growth_exponent = 1;
  m.growth_constant = 24.0 * c;
  return m;
}

/// -x^2/2 + x^4/4, the admissible even maximum.
inline SelectionFunction even_quartic() {
  auto m = double_well(1.0);
  m.name = "even_quartic";
  return m;
}

/// x^2/2 + b x^3/(1+x^2); the cubic part makes m_1 nonzero.
inline SelectionFunction nonsymmetric(double b = 0.1) {
  // x^3/(1+x^2) = x - g(x) with g(x) = x/(1+x^2)
  SelectionFunction m;
  m.name = "nonsymmetric";
  m.value = [b](double x) { return 0.5 * x * x + b * x * x * x / (1.0 + x * x); };
  m.d1 = [b](double x) {
    const double u = 1.0 + x * x;
    return x + b * (1.0 - (1.0 - x * x) / (u * u));
  };
  m.d2 = [b](double x) {
    const double u = 1.0 + x * x;
    return 1.0 - b * 2.0 * x * (x * x - 3.0) / (u * u * u);
  };
  m.d3 = [b](double x) {
    const double u = 1.0 + x * x;
    return b * 6.0 * (x * x * x * x - 6.0 * x * x + 1.0) / (u * u * u * u);
  };
  m.growth_exponent = 1;
  m.growth_constant = 6.0 * std::abs(b);
  return m;
}

/// Natural cubic spline through (x_i, y_i); linear continuation outside the
/// table (the natural end condition).
class CubicSpline {
 public:
  CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    require(n >= 3 && y_.size() == n, ErrorKind::config, "spline needs >= 3 matching samples");
    for (std::size_t i = 1; i < n; ++i)
      require(x_[i] > x_[i - 1], ErrorKind::config, "spline abscissae must increase");
    // second derivatives by the tridiagonal system, natural ends
    m_.assign(n, 0.0);
    std::vector<double> c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      const double rhs = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
      const double diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
      c[i] = h1 / diag;
      d[i] = (rhs - h0 * d[i - 1]) / diag;
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m_[i] = d[i] - c[i] * m_[i + 1];
      if (i == 1) break;
    }
  }

  double operator()(double x) const { return eval(x, 0); }

  double eval(double x, int order) const {
    const std::size_t n = x_.size();
    if (x < x_.front() || x > x_.back()) {
      const bool left = x < x_.front();
      const std::size_t e = left ? 0 : n - 1;
      const double slope = eval(x_[e], 1);
      if (order == 0) return y_[e] + slope * (x - x_[e]);
      return order == 1 ? slope : 0.0;
    }
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - x_.begin())) - 1;
    if (i >= n - 1) i = n - 2;
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - x) / h;
    const double b = (x - x_[i]) / h;
    switch (order) {
      case 0:
        return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
      case 1:
        return (y_[i + 1] - y_[i]) / h + (-(3 * a * a - 1) * m_[i] + (3 * b * b - 1) * m_[i + 1]) * h / 6.0;
      case 2:
        return a * m_[i] + b * m_[i + 1];
      default:
        return (m_[i + 1] - m_[i]) / h;
    }
  }

  double lower() const { return x_.front(); }
  double upper() const { return x_.back(); }

 private:
  std::vector<double> x_, y_, m_;
};

inline SelectionFunction tabulated(std::vector<double> x, std::vector<double> y, double extremum = 0.0) {
  auto spline = std::make_shared<CubicSpline>(std::move(x), std::move(y));
  SelectionFunction m;
  m.name = "table";
  m.value = [spline](double t) { return spline->eval(t, 0); };
  m.d1 = [spline](double t) { return spline->eval(t, 1); };
  m.d2 = [spline](double t) { return spline->eval(t, 2); };
  m.d3 = [spline](double t) { return spline->eval(t, 3); };
  m.extremum = extremum;
  m.search = Interval{spline->lower(), spline->upper()};
  return m;
}

/// Built-in by name, parameter ignored where not applicable.
inline SelectionFunction by_name(const std::string& name, std::optional<double> param = std::nullopt) {
  if (name == "zero") return zero();
  if (name == "quadratic") return quadratic();
  if (name == "even_quartic") return even_quartic();
  if (name == "double_well") return double_well(param.value_or(3.0));
  if (name == "nonsymmetric") return nonsymmetric(param.value_or(0.1));
  fail(ErrorKind::config, "unknown selection function '" + name + "'");
}

}  // namespace selection

/// Coarse sampling on the search interval followed by golden-section
/// refinement around the best sample. Declared minima short-circuit.
inline GlobalMinimum global_minimum(const SelectionFunction& m, std::optional<Interval> interval = std::nullopt) {
  if (m.global_min && !interval) return *m.global_min;
  const Interval iv = interval.value_or(m.search);
  require(iv.upper > iv.lower, ErrorKind::insufficient_metadata, "empty minimum search interval");
  constexpr int samples = 4001;
  const double dx = (iv.upper - iv.lower) / (samples - 1);
  int best = 0;
  double best_val = m(iv.lower);
  for (int i = 1; i < samples; ++i) {
    const double v = m(iv.lower + i * dx);
    require(std::isfinite(v), ErrorKind::numeric, "non-finite m during minimum search");
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  double a = iv.lower + std::max(0, best - 1) * dx;
  double b = iv.lower + std::min(samples - 1, best + 1) * dx;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = m(c), fd = m(d);
  for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, std::abs(a)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = m(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = m(d);
    }
  }
  GlobalMinimum out{best_val, iv.lower + best * dx};
  const double x = 0.5 * (a + b);
  const double v = m(x);
  if (v < out.value) out = GlobalMinimum{v, x};
  return out;
}

}  // namespace ifsm
