#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "pairnet/common.hpp"

namespace pairnet {

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column j pairs with values[j]
  int sweeps = 0;
  bool converged = false;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Sweeps stop once the
/// off-diagonal Frobenius norm falls below rel_tol * |trace| (or is exactly zero).
inline SymmetricEigen jacobi_eigen(Matrix a, double rel_tol = 1e-12, int max_sweeps = 100) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw Error(Errc::DimensionMismatch, "jacobi_eigen needs a square matrix");

  SymmetricEigen out;
  out.vectors = Matrix::identity(n);
  Matrix& v = out.vectors;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = 0; q < n; ++q)
        if (p != q) s += a(p, q) * a(p, q);
    return std::sqrt(s);
  };
  auto trace_abs = [&] {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t += a(i, i);
    return std::abs(t);
  };
  const double threshold = rel_tol * trace_abs();

  for (; out.sweeps < max_sweeps; ++out.sweeps) {
    double off = off_norm();
    if (off == 0.0 || off < threshold) {
      out.converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!out.converged && off_norm() < threshold) out.converged = true;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  out.values.resize(n);
  Matrix sorted(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t k = 0; k < n; ++k) sorted(k, j) = v(k, order[j]);
  }
  out.vectors = std::move(sorted);
  return out;
}

}  // namespace pairnet
