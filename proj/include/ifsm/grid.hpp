#pragma once

// Sampled densities on uniform grids, in trait coordinates (q-frame) or in
// the rescaled frame N(x) = eps q(eps x) (N-frame).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ifsm/error.hpp"
#include "ifsm/hermite.hpp"

namespace ifsm {

enum class Frame { q, n };

inline const char* to_string(Frame f) { return f == Frame::q ? "q" : "N"; }

inline constexpr double kDefaultHalfWidth = 12.0;
/// Odd so that the extremum sits on a node and reflections map nodes to nodes.
inline constexpr std::size_t kDefaultGridPoints = 2049;

/// x_j = lower + j * step, j = 0..size-1.
struct Grid {
  double lower = -kDefaultHalfWidth;
  double step = 2.0 * kDefaultHalfWidth / (kDefaultGridPoints - 1);
  std::size_t size = kDefaultGridPoints;

  static Grid symmetric(double half_width, std::size_t points) {
    require(half_width > 0.0, ErrorKind::domain, "grid half-width must be positive");
    require(points >= 3, ErrorKind::domain, "grid needs at least 3 points");
    return Grid{-half_width, 2.0 * half_width / static_cast<double>(points - 1), points};
  }

  double x(std::size_t j) const { return lower + static_cast<double>(j) * step; }
  double upper() const { return x(size - 1); }

  /// Same nodes expressed in coordinates multiplied by `factor`.
  Grid scaled(double factor) const { return Grid{lower * factor, step * factor, size}; }
};

struct GridDensity {
  Grid grid;
  std::vector<double> values;
  Frame frame = Frame::n;
  double eps = 1.0;

  std::size_t size() const { return values.size(); }
  double x(std::size_t j) const { return grid.x(j); }
  double step() const { return grid.step; }

  double mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return grid.step * s;
  }

  /// h * sum f(x_j) v_j
  double integrate(const std::function<double(double)>& f) const {
    double s = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) s += f(grid.x(j)) * values[j];
    return grid.step * s;
  }

  double max_value() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
  double min_value() const { return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end()); }

  void normalize() {
    const double m = mass();
    require(m > 0.0 && std::isfinite(m), ErrorKind::numeric, "cannot normalize density of mass " + std::to_string(m));
    for (double& v : values) v /= m;
  }
};

inline GridDensity sample(const Grid& grid, const std::function<double(double)>& f, Frame frame, double eps) {
  GridDensity q{grid, std::vector<double>(grid.size), frame, eps};
  for (std::size_t j = 0; j < grid.size; ++j) {
    q.values[j] = f(grid.x(j));
    require(std::isfinite(q.values[j]), ErrorKind::numeric, "non-finite density sample");
  }
  return q;
}

inline GridDensity gaussian_on_grid(const Grid& grid, double mean, double variance, Frame frame, double eps) {
  require(variance > 0.0, ErrorKind::domain, "variance must be positive");
  return sample(grid, [&](double x) { return gaussian_density(x - mean, variance); }, frame, eps);
}

/// Default N-frame grid, or its image in the q-frame at scale eps.
inline Grid default_grid(Frame frame, double eps, double half_width = kDefaultHalfWidth,
                         std::size_t points = kDefaultGridPoints) {
  const Grid g = Grid::symmetric(half_width, points);
  return frame == Frame::n ? g : g.scaled(eps);
}

/// Exact change of frame: nodes rescale, values pick up the Jacobian.
inline GridDensity to_frame(const GridDensity& q, Frame target) {
  if (q.frame == target) return q;
  GridDensity out = q;
  out.frame = target;
  const double f = target == Frame::n ? 1.0 / q.eps : q.eps;
  out.grid = q.grid.scaled(f);
  for (double& v : out.values) v /= f;
  return out;
}

/// Largest value within three nodes of either end, relative to the maximum.
inline double boundary_fraction(const GridDensity& q) {
  const double peak = q.max_value();
  if (peak <= 0.0) return 0.0;
  const std::size_t n = q.size();
  const std::size_t band = std::min<std::size_t>(3, n / 2);
  double edge = 0.0;
  for (std::size_t j = 0; j < band; ++j) edge = std::max({edge, std::abs(q.values[j]), std::abs(q.values[n - 1 - j])});
  return edge / peak;
}

inline void require_interior(const GridDensity& q, double tolerance = 1e-12) {
  const double b = boundary_fraction(q);
  require(b <= tolerance, ErrorKind::domain_too_small,
          "density reaches the grid boundary (edge/max = " + std::to_string(b) + ")");
}

/// alpha_k = int N(x) H_k(x) dx by the grid rule; input converted to the N-frame.
inline Coefficients project_grid(const GridDensity& q, int max_degree) {
  const GridDensity n = to_frame(q, Frame::n);
  Coefficients alpha(static_cast<std::size_t>(max_degree) + 1, 0.0);
  std::vector<double> h(alpha.size());
  for (std::size_t j = 0; j < n.size(); ++j) {
    if (n.values[j] == 0.0) continue;
    hermite_eval_all(n.x(j), h);
    for (std::size_t k = 0; k < alpha.size(); ++k) alpha[k] += n.values[j] * h[k];
  }
  for (double& a : alpha) a *= n.grid.step;
  return alpha;
}

/// N(x_j) = (sum alpha_k H_k(x_j)) G(x_j) on an N-frame grid; then moved to `frame`.
inline GridDensity synthesize_grid(std::span<const double> alpha, const Grid& n_grid, Frame frame = Frame::n,
                                   double eps = 1.0) {
  GridDensity n{n_grid, std::vector<double>(n_grid.size), Frame::n, eps};
  for (std::size_t j = 0; j < n_grid.size; ++j) {
    const double x = n_grid.x(j);
    n.values[j] = synthesize(alpha, x) * gaussian_density(x);
  }
  return to_frame(n, frame);
}

}  // namespace ifsm
