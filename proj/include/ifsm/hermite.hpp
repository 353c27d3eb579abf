#pragma once

// Orthonormal probabilists' Hermite basis of L^2(R, G(x)dx), G the standard
// Gaussian density, together with the matching Gauss-Hermite rule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ifsm/error.hpp"

namespace ifsm {

/// Dense Hermite coefficient sequence (alpha_0, ..., alpha_K).
using Coefficients = std::vector<double>;

inline constexpr int kDefaultTruncation = 32;
inline constexpr int kDefaultQuadratureNodes = 128;

/// Standard Gaussian density G.
inline double gaussian_density(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Centered Gaussian density with variance `variance`.
inline double gaussian_density(double x, double variance) {
  return std::exp(-0.5 * x * x / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

/// k-th moment of G: zero for odd k, (k-1)!! for even k.
inline double gaussian_moment(int k) {
  require(k >= 0 && k <= 300, ErrorKind::range, "gaussian_moment order " + std::to_string(k));
  if (k % 2 != 0) return 0.0;
  double s = 1.0;
  for (int j = 2; j <= k; j += 2) s *= static_cast<double>(j - 1);
  return s;
}

/// k-th moment of the unit segregation kernel (variance 1/2): sigma_k / 2^{k/2}.
inline double kernel_moment(int k) {
  if (k % 2 != 0) return 0.0;
  return gaussian_moment(k) / std::ldexp(1.0, k / 2);
}

/// Table of Gaussian moments sigma_0..sigma_{2K}.
class GaussianMoments {
 public:
  explicit GaussianMoments(int max_degree) : sigma_(2 * static_cast<std::size_t>(max_degree) + 1) {
    require(max_degree >= 0, ErrorKind::range, "negative truncation");
    for (std::size_t k = 0; k < sigma_.size(); ++k) sigma_[k] = gaussian_moment(static_cast<int>(k));
  }

  double operator()(int k) const {
    require(k >= 0 && static_cast<std::size_t>(k) < sigma_.size(), ErrorKind::range,
            "moment order " + std::to_string(k) + " outside table");
    return sigma_[static_cast<std::size_t>(k)];
  }

  int max_order() const { return static_cast<int>(sigma_.size()) - 1; }

 private:
  std::vector<double> sigma_;
};

/// Normalized Hermite polynomial H_k(x) by the upward three-term recurrence
/// sqrt(k+1) H_{k+1} = x H_k - sqrt(k) H_{k-1}.
inline double hermite_eval(int k, double x) {
  require(k >= 0, ErrorKind::range, "negative Hermite degree");
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int j = 1; j < k; ++j) {
    const double next = (x * cur - std::sqrt(static_cast<double>(j)) * prev) / std::sqrt(j + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Fills out[k] = H_k(x) for k = 0..out.size()-1.
inline void hermite_eval_all(double x, std::span<double> out) {
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = x;
  for (std::size_t j = 1; j + 1 < out.size(); ++j) {
    out[j + 1] = (x * out[j] - std::sqrt(static_cast<double>(j)) * out[j - 1]) /
                 std::sqrt(static_cast<double>(j + 1));
  }
}

/// Basis of degree <= K with its precomputed tables.
class HermiteBasis {
 public:
  explicit HermiteBasis(int max_degree = kDefaultTruncation)
      : max_degree_(max_degree), moments_(max_degree) {
    require(max_degree >= 1, ErrorKind::range, "truncation must be >= 1");
    log_factorial_.resize(2 * static_cast<std::size_t>(max_degree) + 2, 0.0);
    for (std::size_t j = 1; j < log_factorial_.size(); ++j)
      log_factorial_[j] = log_factorial_[j - 1] + std::log(static_cast<double>(j));
  }

  int max_degree() const { return max_degree_; }
  std::size_t size() const { return static_cast<std::size_t>(max_degree_) + 1; }

  double eval(int k, double x) const {
    require(k >= 0 && k <= max_degree_, ErrorKind::range,
            "Hermite degree " + std::to_string(k) + " beyond basis");
    return hermite_eval(k, x);
  }

  void eval_all(double x, std::span<double> out) const { hermite_eval_all(x, out.first(std::min(out.size(), size()))); }

  const GaussianMoments& moments() const { return moments_; }

  double log_factorial(int j) const {
    require(j >= 0 && static_cast<std::size_t>(j) < log_factorial_.size(), ErrorKind::range,
            "log-factorial index");
    return log_factorial_[static_cast<std::size_t>(j)];
  }

 private:
  int max_degree_;
  GaussianMoments moments_;
  std::vector<double> log_factorial_;
};

/// Gauss-Hermite rule for the probability weight G: sum w_i p(x_i) = int p G
/// exactly for deg p <= 2n-1.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
  int exactness_degree() const { return 2 * static_cast<int>(nodes.size()) - 1; }
};

/// Golub-Welsch nodes polished by Newton on H_n; weights from the Christoffel
/// function 1/sum_{k<n} H_k(x_i)^2, which keeps the tiny tail weights accurate
/// in relative terms (eigenvector components do not).
inline QuadratureRule gauss_hermite_rule(int n = kDefaultQuadratureNodes) {
  require(n >= 1 && n <= 400, ErrorKind::range, "quadrature size " + std::to_string(n));
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  if (n == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = 1.0;
    return rule;
  }

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, ErrorKind::numeric, "Golub-Welsch eigen solve failed");

  std::vector<double> h(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i < n; ++i) {
    double x = solver.eigenvalues()[i];
    for (int it = 0; it < 8; ++it) {
      hermite_eval_all(x, h);
      // H_n' = sqrt(n) H_{n-1}
      const double step = h[static_cast<std::size_t>(n)] / (std::sqrt(static_cast<double>(n)) * h[static_cast<std::size_t>(n - 1)]);
      x -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    hermite_eval_all(x, std::span<double>(h).first(static_cast<std::size_t>(n)));
    double christoffel = 0.0;
    for (int k = 0; k < n; ++k) christoffel += h[static_cast<std::size_t>(k)] * h[static_cast<std::size_t>(k)];
    rule.nodes[static_cast<std::size_t>(i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = 1.0 / christoffel;
  }

  // exact reflection symmetry of the rule
  for (int i = 0; i < n / 2; ++i) {
    const auto a = static_cast<std::size_t>(i);
    const auto b = static_cast<std::size_t>(n - 1 - i);
    const double x = 0.5 * (rule.nodes[b] - rule.nodes[a]);
    const double w = 0.5 * (rule.weights[a] + rule.weights[b]);
    rule.nodes[a] = -x;
    rule.nodes[b] = x;
    rule.weights[a] = w;
    rule.weights[b] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

/// alpha_k = sum_i w_i f(x_i) H_k(x_i), k = 0..K.
inline Coefficients project(const std::function<double(double)>& f, const QuadratureRule& rule, int max_degree) {
  require(max_degree >= 0, ErrorKind::range, "negative truncation");
  Coefficients alpha(static_cast<std::size_t>(max_degree) + 1, 0.0);
  std::vector<double> h(alpha.size());
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double fx = f(rule.nodes[i]);
    require(std::isfinite(fx), ErrorKind::numeric, "non-finite sample at node " + std::to_string(rule.nodes[i]));
    hermite_eval_all(rule.nodes[i], h);
    const double wf = rule.weights[i] * fx;
    for (std::size_t k = 0; k < alpha.size(); ++k) alpha[k] += wf * h[k];
  }
  return alpha;
}

/// Clenshaw evaluation of sum_k alpha_k H_k(x).
inline double synthesize(std::span<const double> alpha, double x) {
  double b1 = 0.0;  // b_{k+1}
  double b2 = 0.0;  // b_{k+2}
  for (std::size_t k = alpha.size(); k-- > 0;) {
    // H_{k+1} = (x/sqrt(k+1)) H_k - sqrt(k/(k+1)) H_{k-1}
    const double a = x / std::sqrt(static_cast<double>(k + 1));
    const double beta = -std::sqrt(static_cast<double>(k + 1) / static_cast<double>(k + 2));
    const double b0 = alpha[k] + a * b1 + beta * b2;
    b2 = b1;
    b1 = b0;
  }
  return b1;
}

/// l2 norm of the coefficient sequence, equal to the L^2(G) norm of the
/// synthesized function by Parseval.
inline double weighted_l2_norm(std::span<const double> alpha) {
  double s = 0.0;
  for (double a : alpha) s += a * a;
  return std::sqrt(s);
}

}  // namespace ifsm
