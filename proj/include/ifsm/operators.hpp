#pragma once

// Reproduction operator on grids and on Hermite coefficients, Hermite data of
// the selection term, and the central-moment law of the reproduction operator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "ifsm/diagnostics.hpp"
#include "ifsm/error.hpp"
#include "ifsm/grid.hpp"
#include "ifsm/hermite.hpp"
#include "ifsm/selection.hpp"

namespace ifsm {

// ---------------------------------------------------------------- grid form

enum class ConvolutionMethod { direct, fft };

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline std::size_t fft_size(std::size_t min_size) {
  for (std::size_t p = min_size;; ++p) {
    std::size_t r = p;
    for (std::size_t f : {2u, 3u, 5u})
      while (r % f == 0) r /= f;
    if (r == 1) return p;
  }
}

}  // namespace detail

/// Two-stage evaluation of T[q](x) = int int Gamma(x - (y+y')/2) q(y) q(y') dy dy'
/// on a fixed grid. Stage one forms the parent-mean density
/// psi(s) = 2 int q(y) q(2s - y) dy; on a uniform grid 2 s_j - y_i is the node
/// 2j - i, so psi_j = 2h sum_i q_i q_{2j-i} needs no interpolation. Stage two
/// convolves psi with the segregation kernel.
class Reproduction {
 public:
  /// `kernel_variance` is in the coordinates of the grid: eps^2/2 for q-frame
  /// densities, 1/2 in the N-frame.
  Reproduction(const Grid& grid, double kernel_variance, ConvolutionMethod method = ConvolutionMethod::direct)
      : grid_(grid), method_(method) {
    require(kernel_variance > 0.0, ErrorKind::domain, "kernel variance must be positive");
    const std::size_t n = grid.size;
    kernel_.resize(n);
    for (std::size_t d = 0; d < n; ++d) kernel_[d] = gaussian_density(static_cast<double>(d) * grid.step, kernel_variance);
    kernel_full_.resize(2 * n - 1);
    for (std::size_t d = 0; d < n; ++d) kernel_full_[n - 1 + d] = kernel_full_[n - 1 - d] = kernel_[d];
    if (method_ == ConvolutionMethod::fft) setup_fft();
  }

  Reproduction(const Reproduction&) = delete;
  Reproduction& operator=(const Reproduction&) = delete;

  ~Reproduction() {
    if (forward_ != nullptr) {
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      fftw_destroy_plan(forward_);
      fftw_destroy_plan(backward_);
    }
  }

  const Grid& grid() const { return grid_; }
  ConvolutionMethod method() const { return method_; }

  /// Values only; no boundary or mass checks. Safe to call concurrently.
  void apply(std::span<const double> q, std::span<double> out) const {
    require(q.size() == grid_.size && out.size() == grid_.size, ErrorKind::range, "grid size mismatch");
    if (method_ == ConvolutionMethod::fft)
      apply_fft(q, out);
    else
      apply_direct(q, out);
  }

 private:
  void apply_direct(std::span<const double> q, std::span<double> out) const {
    const std::size_t n = grid_.size;
    const double h = grid_.step;
    std::vector<double> psi(n), rq(q.rbegin(), q.rend());
    // q_{2j-i} = rq[n-1-2j+i]: both factors walk forward
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t lo = 2 * j >= n - 1 ? 2 * j - (n - 1) : 0;
      const std::size_t hi = std::min(n - 1, 2 * j);
      psi[j] = 2.0 * h * dot(q.data() + lo, rq.data() + (n - 1 - 2 * j + lo), hi - lo + 1);
    }
    // kernel_full_[n-1+d] = Gamma(d h) for |d| < n
    for (std::size_t j = 0; j < n; ++j) out[j] = h * dot(kernel_full_.data() + (n - 1 - j), psi.data(), n);
  }

  /// Fixed-order dot product with four partial sums.
  static double dot(const double* a, const double* b, std::size_t len) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) {
      s0 += a[i] * b[i];
      s1 += a[i + 1] * b[i + 1];
      s2 += a[i + 2] * b[i + 2];
      s3 += a[i + 3] * b[i + 3];
    }
    for (; i < len; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
  }

  void setup_fft() {
    const std::size_t n = grid_.size;
    p_ = detail::fft_size(2 * n - 1);
    const std::size_t c = p_ / 2 + 1;
    std::vector<double> real(p_, 0.0);
    std::vector<std::complex<double>> spec(c);
    {
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(p_), real.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
      backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(p_), reinterpret_cast<fftw_complex*>(spec.data()),
                                       real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    require(forward_ != nullptr && backward_ != nullptr, ErrorKind::numeric, "FFTW planning failed");
    // kernel at signed offsets d, wrapped modulo p
    std::fill(real.begin(), real.end(), 0.0);
    for (std::size_t d = 0; d < n; ++d) {
      real[d] = kernel_[d];
      if (d > 0) real[p_ - d] = kernel_[d];
    }
    kernel_hat_.resize(c);
    fftw_execute_dft_r2c(forward_, real.data(), reinterpret_cast<fftw_complex*>(kernel_hat_.data()));
  }

  void apply_fft(std::span<const double> q, std::span<double> out) const {
    const std::size_t n = grid_.size;
    const double h = grid_.step;
    const double inv_p = 1.0 / static_cast<double>(p_);
    std::vector<double> real(p_, 0.0);
    std::vector<std::complex<double>> spec(p_ / 2 + 1);
    auto* cs = reinterpret_cast<fftw_complex*>(spec.data());

    std::copy(q.begin(), q.end(), real.begin());
    fftw_execute_dft_r2c(forward_, real.data(), cs);
    for (auto& z : spec) z *= z;
    fftw_execute_dft_c2r(backward_, cs, real.data());
    // psi_j = 2h (q*q)[2j]
    std::vector<double> psi(n);
    for (std::size_t j = 0; j < n; ++j) psi[j] = 2.0 * h * real[2 * j] * inv_p;

    std::fill(real.begin(), real.end(), 0.0);
    std::copy(psi.begin(), psi.end(), real.begin());
    fftw_execute_dft_r2c(forward_, real.data(), cs);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= kernel_hat_[k];
    fftw_execute_dft_c2r(backward_, cs, real.data());
    // round-off can leave tiny negatives where the exact result underflows
    for (std::size_t j = 0; j < n; ++j) out[j] = std::max(0.0, h * real[j] * inv_p);
  }

  Grid grid_;
  ConvolutionMethod method_;
  std::vector<double> kernel_;
  std::vector<double> kernel_full_;
  std::size_t p_ = 0;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
  std::vector<std::complex<double>> kernel_hat_;
};

inline double kernel_variance_for(const GridDensity& q, double eps) {
  return q.frame == Frame::q ? 0.5 * eps * eps : 0.5;
}

/// T_eps[q] on q's grid (kernel Gamma_eps for q-frame input, Gamma_1 for
/// N-frame input). Raises domain-too-small when q touches the boundary.
inline GridDensity reproduction_grid(const GridDensity& q, double eps,
                                     ConvolutionMethod method = ConvolutionMethod::direct) {
  require(eps > 0.0, ErrorKind::domain, "eps must be positive");
  require_interior(q);
  const Reproduction op(q.grid, kernel_variance_for(q, eps), method);
  GridDensity out{q.grid, std::vector<double>(q.size()), q.frame, eps};
  op.apply(q.values, out.values);
  return out;
}

// ------------------------------------------------------------ spectral form

/// c_{k,l} = sqrt(binom(k,l)) / 2^k, built by c_{k,0} = 2^-k and
/// c_{k,l+1} = c_{k,l} sqrt((k-l)/(l+1)).
class ProductTable {
 public:
  explicit ProductTable(int max_degree = kDefaultTruncation) : k_(max_degree) {
    require(max_degree >= 0, ErrorKind::range, "negative truncation");
    c_.resize(static_cast<std::size_t>(k_ + 1));
    for (int k = 0; k <= k_; ++k) {
      auto& row = c_[static_cast<std::size_t>(k)];
      row.resize(static_cast<std::size_t>(k + 1));
      row[0] = std::ldexp(1.0, -k);
      for (int l = 0; l < k; ++l)
        row[static_cast<std::size_t>(l + 1)] = row[static_cast<std::size_t>(l)] * std::sqrt(static_cast<double>(k - l) / (l + 1.0));
    }
  }

  int max_degree() const { return k_; }

  double operator()(int k, int l) const {
    require(k >= 0 && k <= k_ && l >= 0 && l <= k, ErrorKind::range, "product table index");
    return c_[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
  }

  /// Overwrites one entry; used to check that validation notices corruption.
  void override_entry(int k, int l, double value) {
    require(k >= 0 && k <= k_ && l >= 0 && l <= k, ErrorKind::range, "product table index");
    c_[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)] = value;
  }

 private:
  int k_;
  std::vector<std::vector<double>> c_;
};

/// gamma_k = sum_{l<=k} c_{k,l} alpha_l beta_{k-l}, k <= K; modes above K dropped.
inline Coefficients reproduction_spectral(const ProductTable& table, std::span<const double> alpha,
                                          std::span<const double> beta) {
  const int kmax = table.max_degree();
  Coefficients gamma(static_cast<std::size_t>(kmax) + 1, 0.0);
  const int na = static_cast<int>(alpha.size());
  const int nb = static_cast<int>(beta.size());
  for (int k = 0; k <= kmax; ++k) {
    double s = 0.0;
    const int lo = std::max(0, k - nb + 1);
    const int hi = std::min(k, na - 1);
    for (int l = lo; l <= hi; ++l) s += table(k, l) * alpha[static_cast<std::size_t>(l)] * beta[static_cast<std::size_t>(k - l)];
    gamma[static_cast<std::size_t>(k)] = s;
  }
  return gamma;
}

inline Coefficients reproduction_spectral(std::span<const double> alpha, std::span<const double> beta) {
  const int k = static_cast<int>(std::max(alpha.size(), beta.size())) - 1;
  return reproduction_spectral(ProductTable(std::max(k, 0)), alpha, beta);
}

// ------------------------------------------------------------ selection data

struct SpectralSelectionData {
  double eps = 0.0;
  int max_degree = 0;
  Coefficients m;          // m_k = (H_k, m_eps)_G
  Eigen::MatrixXd matrix;  // M_{k,l} = (H_l, m_eps H_k)_G
  double m0 = 0.0;
  double D = 0.0;          // M_{0,0} - M_{1,1}
  double l2_norm = 0.0;    // ||m_eps||_{L^2(G)}
  double min_at_nodes = 0.0;

  double m1() const { return m.size() > 1 ? m[1] : 0.0; }
};

/// m_eps(x) = m(eps x) projected with the quadrature rule. Nodes are summed
/// in mirrored pairs (x, -x), so even m gives exact zeros at odd parity.
inline SpectralSelectionData selection_data(const SelectionFunction& m, double eps, int max_degree,
                                            const QuadratureRule& rule) {
  require(eps > 0.0, ErrorKind::domain, "eps must be positive");
  require(max_degree >= 1, ErrorKind::range, "truncation must be >= 1");
  const std::size_t kk = static_cast<std::size_t>(max_degree) + 1;
  const std::size_t n = rule.size();
  for (std::size_t i = 0; i < n / 2; ++i)
    require(rule.nodes[i] == -rule.nodes[n - 1 - i] && rule.weights[i] == rule.weights[n - 1 - i], ErrorKind::numeric,
            "quadrature rule is not mirror symmetric");
  SpectralSelectionData d;
  d.eps = eps;
  d.max_degree = max_degree;
  d.min_at_nodes = std::numeric_limits<double>::infinity();
  d.m.assign(kk, 0.0);
  d.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(kk));
  std::vector<double> h(kk);
  double norm2 = 0.0;
  auto value = [&](double x) {
    const double v = m(eps * x);
    require(std::isfinite(v), ErrorKind::numeric, "m not finite at scaled node " + std::to_string(eps * x));
    d.min_at_nodes = std::min(d.min_at_nodes, v);
    return v;
  };
  // x >= 0 half of the rule; the mirrored node contributes (-1)^parity
  for (std::size_t i = n / 2; i < n; ++i) {
    const double x = rule.nodes[i];
    const bool centre = (n % 2 == 1) && i == n / 2;
    const double w = centre ? 0.5 * rule.weights[i] : rule.weights[i];
    const double vp = value(x);
    const double vm = centre ? vp : value(-x);
    const double even = w * (vp + vm), odd = w * (vp - vm);
    norm2 += w * (vp * vp + vm * vm);
    hermite_eval_all(x, h);
    for (std::size_t k = 0; k < kk; ++k) {
      d.m[k] += (k % 2 == 0 ? even : odd) * h[k];
      for (std::size_t l = 0; l <= k; ++l)
        d.matrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) += ((k + l) % 2 == 0 ? even : odd) * h[k] * h[l];
    }
  }
  for (std::size_t k = 0; k < kk; ++k)
    for (std::size_t l = 0; l < k; ++l)
      d.matrix(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = d.matrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
  d.m0 = d.m[0];
  d.D = d.matrix(0, 0) - d.matrix(1, 1);
  d.l2_norm = std::sqrt(norm2);
  return d;
}

inline SpectralSelectionData selection_data(const SelectionFunction& m, double eps,
                                            int max_degree = kDefaultTruncation) {
  return selection_data(m, eps, max_degree, gauss_hermite_rule(kDefaultQuadratureNodes));
}

// ----------------------------------------------------------- moment law

/// Central moments of T_eps[q] from those of q: the mean is kept and
/// M'_k = sum_{i even} C(k,i) s^i sigma~_i 2^{-(k-i)} sum_j C(k-i,j) M_j M_{k-i-j},
/// with s = eps in the q-frame and s = 1 in the N-frame.
inline MomentVector reproduction_central_moments(const MomentVector& in, double eps, int k_max) {
  require(k_max >= 0 && k_max <= in.max_order(), ErrorKind::range,
          "moment order " + std::to_string(k_max) + " beyond stored moments");
  const double s = in.frame == Frame::q ? eps : 1.0;
  MomentVector out;
  out.frame = in.frame;
  out.eps = eps;
  out.m0 = in.m0 * in.m0;
  out.m1 = in.m1;
  out.central.assign(static_cast<std::size_t>(k_max) + 1, 0.0);
  for (int k = 0; k <= k_max; ++k) {
    double total = 0.0;
    for (int i = 0; i <= k; i += 2) {
      double pair = 0.0;
      for (int j = 0; j <= k - i; ++j) pair += binomial(k - i, j) * in[j] * in[k - i - j];
      total += binomial(k, i) * std::pow(s, i) * kernel_moment(i) * std::ldexp(pair, -(k - i));
    }
    out.central[static_cast<std::size_t>(k)] = total;
  }
  if (k_max >= 1) out.central[1] = 0.0;
  return out;
}

}  // namespace ifsm
