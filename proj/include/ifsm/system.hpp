#pragma once

// Right-hand side of the truncated Hermite-coefficient system.

#include <span>

#include "ifsm/error.hpp"
#include "ifsm/hermite.hpp"
#include "ifsm/operators.hpp"

namespace ifsm {

/// d alpha_k/dt = gamma_k(alpha, alpha) - alpha_k - (M alpha)_k + alpha_k (alpha . m),
/// k = 1..K; the k = 0 entry is zero since alpha_0 = 1 is conserved.
inline Coefficients galerkin_rhs(std::span<const double> alpha, const SpectralSelectionData& data,
                                 const ProductTable& table) {
  const std::size_t n = static_cast<std::size_t>(data.max_degree) + 1;
  require(alpha.size() == n, ErrorKind::range, "coefficient length does not match the selection data");
  require(table.max_degree() == data.max_degree, ErrorKind::range, "product table truncation mismatch");
  Coefficients out = reproduction_spectral(table, alpha, alpha);
  double am = 0.0;
  for (std::size_t l = 0; l < n; ++l) am += alpha[l] * data.m[l];
  for (std::size_t k = 0; k < n; ++k) {
    double ma = 0.0;
    for (std::size_t l = 0; l < n; ++l)
      ma += data.matrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) * alpha[l];
    out[k] += -alpha[k] - ma + alpha[k] * am;
  }
  out[0] = 0.0;
  return out;
}

inline Coefficients galerkin_rhs(std::span<const double> alpha, const SpectralSelectionData& data) {
  return galerkin_rhs(alpha, data, ProductTable(data.max_degree));
}

}  // namespace ifsm
