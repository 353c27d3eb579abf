#pragma once

// Concentrated steady states: the coefficient-space fixed point built on the
// linear part L, the quadratic equation for alpha_1 and the nonlinear map Q,
// plus a direct grid fixed-point solver used as an oracle.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ifsm/error.hpp"
#include "ifsm/grid.hpp"
#include "ifsm/hermite.hpp"
#include "ifsm/model.hpp"
#include "ifsm/operators.hpp"
#include "ifsm/selection.hpp"
#include "ifsm/system.hpp"

namespace ifsm {

/// L_{k,l} = (2^{1-k} - 1 + m_0) delta_{kl} - M_{k,l} on indices k, l = 2..K
/// (row/column 0 of the result is index 2).
inline Eigen::MatrixXd assemble_L(const SpectralSelectionData& data) {
  const Eigen::Index n = data.max_degree - 1;
  require(n >= 1, ErrorKind::range, "truncation must be >= 2");
  Eigen::MatrixXd L = -data.matrix.block(2, 2, n, n);
  for (Eigen::Index i = 0; i < n; ++i) L(i, i) += std::ldexp(1.0, -static_cast<int>(i + 1)) - 1.0 + data.m0;
  return L;
}

/// Smallest k0 >= 0 with min m_eps + 1 >= 2^{-(k0+1)}; empty when min m_eps <= -1.
inline std::optional<int> measured_k0(double min_m) {
  const double v = min_m + 1.0;
  if (!(v > 0.0)) return std::nullopt;
  for (int k0 = 0; k0 < 1060; ++k0)
    if (v >= std::ldexp(1.0, -(k0 + 1))) return k0;
  return std::nullopt;
}

/// Dense LU of L with a conditioning guard and the a-priori inverse bound.
class LinearPart {
 public:
  static constexpr double kMaxCondition = 1e12;

  LinearPart(const Eigen::MatrixXd& L, std::optional<int> k0) : lu_(L), k0_(k0) {
    // partial-pivot rcond misses exact zero pivots; L is small, so use the SVD
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(L).singularValues();
    const double smin = sv.size() > 0 ? sv[sv.size() - 1] : 0.0;
    condition_ = smin > 0.0 ? sv[0] / smin : INFINITY;
    require(condition_ <= kMaxCondition, ErrorKind::singular,
            "L is singular or ill-conditioned (condition " + std::to_string(condition_) + ")");
  }

  std::optional<int> k0() const { return k0_; }
  /// 2^{k0+2}, the bound on ||L^{-1}||.
  std::optional<double> bound() const {
    if (!k0_) return std::nullopt;
    return std::ldexp(1.0, *k0_ + 2);
  }
  double condition() const { return condition_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return lu_.solve(rhs); }

 private:
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  std::optional<int> k0_;
  double condition_ = 1.0;
};

struct LSolution {
  Eigen::VectorXd x;
  double ratio = 0.0;  // ||x|| / ||rhs||
  std::optional<double> bound;
  bool within_bound = true;
};

inline LSolution solve_L(const LinearPart& L, const Eigen::VectorXd& rhs) {
  LSolution s;
  s.x = L.solve(rhs);
  const double nr = rhs.norm();
  s.ratio = nr > 0.0 ? s.x.norm() / nr : 0.0;
  s.bound = L.bound();
  s.within_bound = !s.bound || s.ratio <= *s.bound * (1.0 + 1e-12);
  return s;
}

inline LSolution solve_L(const Eigen::MatrixXd& L, const Eigen::VectorXd& rhs, std::optional<int> k0) {
  return solve_L(LinearPart(L, k0), rhs);
}

/// m_1 a^2 + (D + m_beta) a = m_1 + m~_beta with m_beta = sum_{l>=2} alpha_l m_l
/// and m~_beta = sum_{l>=2} alpha_l M_{1,l}; returns the root of smaller magnitude.
inline double alpha1_root(const Eigen::VectorXd& alpha2, const SpectralSelectionData& data) {
  require(alpha2.size() == data.max_degree - 1, ErrorKind::range, "alpha2 length");
  double m_beta = 0.0, mt_beta = 0.0;
  for (Eigen::Index i = 0; i < alpha2.size(); ++i) {
    m_beta += alpha2[i] * data.m[static_cast<std::size_t>(i + 2)];
    mt_beta += alpha2[i] * data.matrix(1, i + 2);
  }
  const double a = data.m1();
  const double b = data.D + m_beta;
  const double c = -(a + mt_beta);
  if (std::abs(a) < 1e-14) {
    require(std::abs(b) >= 1e-14, ErrorKind::degenerate_pivot, "D + m_beta vanishes in the linear alpha_1 equation");
    return -c / b;
  }
  const double disc = b * b - 4.0 * a * c;
  require(disc >= 0.0, ErrorKind::no_real_root, "alpha_1 equation has no real root; eps too large");
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  require(q != 0.0, ErrorKind::degenerate_pivot, "degenerate alpha_1 equation");
  return c / q;
}

/// Q_k = sum_{0<l<k} c_{k,l} alpha_l alpha_{k-l} + alpha_k sum_{l>=1} alpha_l m_l - alpha_1 M_{1,k}, k = 2..K.
inline Eigen::VectorXd q_map(const Eigen::VectorXd& alpha2, double alpha1, const SpectralSelectionData& data,
                             const ProductTable& table) {
  const int K = data.max_degree;
  require(alpha2.size() == K - 1, ErrorKind::range, "alpha2 length");
  std::vector<double> a(static_cast<std::size_t>(K) + 1, 0.0);
  a[0] = 1.0;
  a[1] = alpha1;
  for (int k = 2; k <= K; ++k) a[static_cast<std::size_t>(k)] = alpha2[k - 2];
  double am = 0.0;
  for (int l = 1; l <= K; ++l) am += a[static_cast<std::size_t>(l)] * data.m[static_cast<std::size_t>(l)];
  Eigen::VectorXd q(K - 1);
  for (int k = 2; k <= K; ++k) {
    double s = 0.0;
    for (int l = 1; l < k; ++l) s += table(k, l) * a[static_cast<std::size_t>(l)] * a[static_cast<std::size_t>(k - l)];
    q[k - 2] = s + a[static_cast<std::size_t>(k)] * am - alpha1 * data.matrix(1, k);
  }
  return q;
}

inline Eigen::VectorXd q_map(const Eigen::VectorXd& alpha2, double alpha1, const SpectralSelectionData& data) {
  return q_map(alpha2, alpha1, data, ProductTable(data.max_degree));
}

struct SteadyProblem {
  SteadyProblem() = default;
  explicit SteadyProblem(SpectralSelectionData d) : data(std::move(d)) {}

  SpectralSelectionData data;
  double tol = 1e-12;
  int max_iterations = 200;
  /// Optional neighborhood constant; when set, membership is checked.
  std::optional<double> C;
  /// Called with (iteration, update) each step; sees the trace even when the
  /// iteration later fails.
  std::function<void(int, double)> on_iteration;
};

struct SteadySolution {
  double eps = 0.0;
  Coefficients alpha;  // alpha_0 = 1
  double residual = 0.0;
  bool certified = false;  // residual <= 10 tol
  int iterations = 0;
  std::vector<double> update_trace;
  double membership = 0.0;  // max(|alpha_1|/eps, ||alpha_2||/eps^2)
  std::optional<int> k0;
  bool l_bound_ok = true;
  double selection_mean = 0.0;  // int m q = sum alpha_k m_k

  double alpha1() const { return alpha[1]; }

  double alpha2_norm() const { return gaussian_distance(alpha); }

  GridDensity density(Frame frame = Frame::n, const Grid& n_grid = default_grid(Frame::n, 1.0)) const {
    return synthesize_grid(alpha, n_grid, frame, eps);
  }

  /// rho = (r~ - int m q)/kappa
  double steady_mass(double r_tilde = 1.0, double kappa = 1.0) const { return (r_tilde - selection_mean) / kappa; }
};

/// Iterates alpha2 <- L^{-1}(m2 - Q(alpha2, alpha1(alpha2))) from alpha2 = 0.
inline SteadySolution steady_fixed_point(const SteadyProblem& problem) {
  const SpectralSelectionData& d = problem.data;
  const int K = d.max_degree;
  require(K >= 4, ErrorKind::range, "steady solver needs K >= 4");
  require(problem.tol > 0.0, ErrorKind::domain, "tolerance must be positive");
  const ProductTable table(K);
  const LinearPart L(assemble_L(d), measured_k0(d.min_at_nodes));

  Eigen::VectorXd m2(K - 1);
  for (int k = 2; k <= K; ++k) m2[k - 2] = d.m[static_cast<std::size_t>(k)];

  // m with no first-order data leaves alpha_1 undetermined (translation
  // invariance); the centered representative is taken
  auto root = [&](const Eigen::VectorXd& a2) {
    try {
      return alpha1_root(a2, d);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_pivot) throw;
      double mt = d.m1();
      for (Eigen::Index i = 0; i < a2.size(); ++i) mt += a2[i] * d.matrix(1, i + 2);
      if (std::abs(mt) >= 1e-14) throw;
      return 0.0;
    }
  };

  SteadySolution sol;
  sol.eps = d.eps;
  sol.k0 = L.k0();
  Eigen::VectorXd a2 = Eigen::VectorXd::Zero(K - 1);
  double a1 = 0.0;
  int growth = 0;
  double last = INFINITY;
  bool converged = false;
  for (int it = 1; it <= problem.max_iterations; ++it) {
    a1 = root(a2);
    const LSolution s = solve_L(L, m2 - q_map(a2, a1, d, table));
    sol.l_bound_ok = sol.l_bound_ok && s.within_bound;
    const double update = (s.x - a2).norm();
    require(std::isfinite(update), ErrorKind::divergence, "non-finite steady iterate");
    sol.update_trace.push_back(update);
    if (problem.on_iteration) problem.on_iteration(it, update);
    a2 = s.x;
    sol.iterations = it;
    growth = update > last ? growth + 1 : 0;
    if (growth >= 3)
      fail(ErrorKind::divergence, "steady iteration not contracting at eps = " + std::to_string(d.eps) +
                                      " (update " + std::to_string(update) + " after " + std::to_string(it) + " iterations)");
    last = update;
    if (update < problem.tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    fail(ErrorKind::divergence, "steady iteration hit " + std::to_string(problem.max_iterations) +
                                    " iterations (last update " + std::to_string(last) + ")");
  a1 = root(a2);

  sol.alpha.assign(static_cast<std::size_t>(K) + 1, 0.0);
  sol.alpha[0] = 1.0;
  sol.alpha[1] = a1;
  for (int k = 2; k <= K; ++k) sol.alpha[static_cast<std::size_t>(k)] = a2[k - 2];

  // certificate with an independently built product table
  const Coefficients r = galerkin_rhs(sol.alpha, d, ProductTable(K));
  sol.residual = weighted_l2_norm(r);
  sol.certified = sol.residual <= 10.0 * problem.tol;
  sol.membership = std::max(std::abs(a1) / d.eps, a2.norm() / (d.eps * d.eps));
  for (int k = 0; k <= K; ++k) sol.selection_mean += sol.alpha[static_cast<std::size_t>(k)] * d.m[static_cast<std::size_t>(k)];
  if (problem.C)
    require(sol.membership <= *problem.C, ErrorKind::divergence,
            "steady state outside the neighborhood C = " + std::to_string(*problem.C));
  return sol;
}

// -------------------------------------------------------------- grid oracle

struct GridOracleOptions {
  double half_width = kDefaultHalfWidth;  // N-frame units
  std::size_t points = kDefaultGridPoints;
  double tol = 1e-10;                     // L1 update
  double theta = 0.5;
  int max_iterations = 200;
  double center = 0.0;                    // trait coordinate of the extremum
  bool override_admissibility = false;
  ConvolutionMethod method = ConvolutionMethod::direct;
};

struct GridOracleResult {
  GridDensity q;  // q-frame
  int iterations = 0;
  double update = 0.0;
  double selection_mean = 0.0;
};

/// Damped iteration q <- (1-theta) q + theta T_eps[q]/(1 + m - int m q),
/// renormalized every step, from G_eps centered at the extremum.
inline GridOracleResult steady_grid_oracle(const SelectionFunction& m, double eps, const GridOracleOptions& opt = {}) {
  require(eps > 0.0, ErrorKind::domain, "eps must be positive");
  require(opt.theta > 0.0 && opt.theta <= 1.0, ErrorKind::domain, "damping must lie in (0, 1]");
  if (!opt.override_admissibility) {
    const Admissibility adm = check_admissibility(m, opt.center);
    require(adm.admissible, ErrorKind::inadmissible,
            "extremum at " + std::to_string(opt.center) + " is inadmissible (margin " + std::to_string(adm.margin) + ")");
  }
  Grid grid = Grid::symmetric(opt.half_width, opt.points).scaled(eps);
  grid.lower += opt.center;
  GridDensity q = gaussian_on_grid(grid, opt.center, eps * eps, Frame::q, eps);
  q.normalize();
  const Reproduction op(grid, 0.5 * eps * eps, opt.method);
  std::vector<double> mv(grid.size), tq(grid.size), next(grid.size);
  for (std::size_t j = 0; j < grid.size; ++j) mv[j] = m(grid.x(j));

  GridOracleResult res;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    require_interior(q);
    op.apply(q.values, tq);
    double mq = 0.0;
    for (std::size_t j = 0; j < grid.size; ++j) mq += mv[j] * q.values[j];
    mq *= grid.step;
    for (std::size_t j = 0; j < grid.size; ++j) {
      const double den = 1.0 + mv[j] - mq;
      if (den <= 0.0 && (q.values[j] > 0.0 || tq[j] > 0.0))
        fail(ErrorKind::inadmissible, "1 + m - int m q <= 0 at x = " + std::to_string(grid.x(j)) +
                                          " where the density is positive");
      next[j] = (1.0 - opt.theta) * q.values[j] + opt.theta * (den > 0.0 ? tq[j] / den : 0.0);
    }
    double mass = 0.0;
    for (double v : next) mass += v;
    mass *= grid.step;
    require(mass > 0.0 && std::isfinite(mass), ErrorKind::divergence, "grid iterate lost its mass");
    double update = 0.0;
    for (std::size_t j = 0; j < grid.size; ++j) {
      next[j] /= mass;
      update += std::abs(next[j] - q.values[j]);
    }
    update *= grid.step;
    q.values.swap(next);
    res.iterations = it;
    res.update = update;
    if (update < opt.tol) {
      require_interior(q);
      res.q = q;
      res.selection_mean = q.integrate([&](double x) { return m(x); });
      return res;
    }
  }
  fail(ErrorKind::divergence, "grid steady iteration hit " + std::to_string(opt.max_iterations) +
                                  " iterations (L1 update " + std::to_string(res.update) + ")");
}

/// Relative L2(G_eps^{-1}) distance between a spectral steady state and a grid
/// density: by Parseval in the N-frame this is the coefficient distance of the
/// grid density's Hermite projection.
inline double oracle_discrepancy(const SteadySolution& sol, const GridDensity& q) {
  GridDensity g = q;
  g.eps = sol.eps;
  const Coefficients b = project_grid(to_frame(g, Frame::n), static_cast<int>(sol.alpha.size()) - 1);
  double d = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) d += (b[k] - sol.alpha[k]) * (b[k] - sol.alpha[k]);
  return std::sqrt(d) / weighted_l2_norm(sol.alpha);
}

}  // namespace ifsm
