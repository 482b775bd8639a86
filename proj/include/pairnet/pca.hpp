#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pairnet/common.hpp"
#include "pairnet/jacobi.hpp"

namespace pairnet {

/// Mean + orthonormal components (rows) + descending eigenvalues of the
/// training covariance. Projection divides each coordinate by its scale
/// (sqrt of the eigenvalue) when `standardize` is set.
struct PcaModel {
  std::vector<double> mean;
  Matrix components;  // m x d
  std::vector<double> eigenvalues;
  std::vector<double> component_scales;
  double total_variance = 0.0;
  bool standardize = true;

  std::size_t dim() const noexcept { return mean.size(); }
  std::size_t num_components() const noexcept { return components.rows(); }

  friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

enum class PcaRoute {
  Auto,        // Gram matrix when d > n, covariance otherwise
  Covariance,  // d x d
  Gram,        // n x n
};

struct PcaOptions {
  PcaRoute route = PcaRoute::Auto;
  bool standardize = true;
};

namespace detail {

struct PcaDecomposition {
  std::vector<double> mean;
  std::vector<double> eigenvalues;  // all of them, descending, clamped at 0
  Matrix components;                // first `kept` sample-space eigenvectors
  double total_variance = 0.0;
  std::size_t positive = 0;         // eigenvalues above the rank tolerance
};

inline Matrix centered(const Matrix& x, std::span<const double> mean) {
  Matrix xc = x;
  for (std::size_t i = 0; i < xc.rows(); ++i) {
    auto r = xc.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= mean[j];
  }
  return xc;
}

inline void fix_sign(std::span<double> w) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < w.size(); ++j)
    if (std::abs(w[j]) > std::abs(w[best])) best = j;
  if (w[best] < 0.0)
    for (double& e : w) e = -e;
}

inline void normalize(std::span<double> w) {
  double norm = std::sqrt(dot(w, w));
  for (double& e : w) e /= norm;
}

inline PcaDecomposition decompose(const Matrix& x, PcaRoute route, std::size_t max_components) {
  const std::size_t n = x.rows(), d = x.cols();
  PcaDecomposition out;
  out.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += r[j];
  }
  for (double& m : out.mean) m /= static_cast<double>(n);

  Matrix xc = centered(x, out.mean);
  const double denom = static_cast<double>(n - 1);
  for (double e : xc.data()) out.total_variance += e * e;
  out.total_variance /= denom;
  if (out.total_variance == 0.0) throw Error(Errc::DegenerateInput, "all training rows are identical");

  if (route == PcaRoute::Auto) route = d > n ? PcaRoute::Gram : PcaRoute::Covariance;

  SymmetricEigen eig;
  if (route == PcaRoute::Covariance) {
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = xc.row(i);
      for (std::size_t p = 0; p < d; ++p) {
        if (r[p] == 0.0) continue;
        for (std::size_t q = p; q < d; ++q) cov(p, q) += r[p] * r[q];
      }
    }
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p; q < d; ++q) {
        cov(p, q) /= denom;
        cov(q, p) = cov(p, q);
      }
    eig = jacobi_eigen(std::move(cov));
  } else {
    Matrix gram(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = i; k < n; ++k) {
        gram(i, k) = dot(xc.row(i), xc.row(k)) / denom;
        gram(k, i) = gram(i, k);
      }
    eig = jacobi_eigen(std::move(gram));
  }

  out.eigenvalues = eig.values;
  for (double& l : out.eigenvalues) l = std::max(l, 0.0);
  const double rank_tol = 1e-10 * out.total_variance;
  out.positive = static_cast<std::size_t>(
      std::count_if(out.eigenvalues.begin(), out.eigenvalues.end(), [&](double l) { return l > rank_tol; }));

  const std::size_t kept = std::min(max_components, out.positive);
  out.components = Matrix(kept, d);
  for (std::size_t c = 0; c < kept; ++c) {
    auto w = out.components.row(c);
    if (route == PcaRoute::Covariance) {
      for (std::size_t j = 0; j < d; ++j) w[j] = eig.vectors(j, c);
    } else {
      // sample-space eigenvector u maps to X_c^T u in feature space
      for (std::size_t i = 0; i < n; ++i) {
        const double ui = eig.vectors(i, c);
        if (ui == 0.0) continue;
        auto r = xc.row(i);
        for (std::size_t j = 0; j < d; ++j) w[j] += ui * r[j];
      }
      normalize(w);
      // one modified Gram-Schmidt pass against earlier components
      for (std::size_t prev = 0; prev < c; ++prev) {
        auto u = out.components.row(prev);
        const double proj = dot(w, u);
        for (std::size_t j = 0; j < d; ++j) w[j] -= proj * u[j];
      }
      normalize(w);
    }
    fix_sign(w);
  }
  return out;
}

inline PcaModel assemble(detail::PcaDecomposition dec, std::size_t m, bool standardize) {
  PcaModel model;
  model.mean = std::move(dec.mean);
  model.total_variance = dec.total_variance;
  model.standardize = standardize;
  model.components = Matrix(m, model.mean.size());
  for (std::size_t c = 0; c < m; ++c) {
    auto src = dec.components.row(c);
    std::copy(src.begin(), src.end(), model.components.row(c).begin());
  }
  model.eigenvalues.assign(dec.eigenvalues.begin(), dec.eigenvalues.begin() + static_cast<std::ptrdiff_t>(m));
  for (double l : model.eigenvalues) model.component_scales.push_back(l > 0.0 ? std::sqrt(l) : 1.0);
  return model;
}

inline void check_fit_args(const Matrix& x, std::size_t m) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) throw Error(Errc::OutOfRange, "PCA needs at least 2 samples");
  if (m < 1 || m > std::min(n - 1, d))
    throw Error(Errc::OutOfRange, "PCA dimension " + std::to_string(m) + " outside [1, " +
                                      std::to_string(std::min(n - 1, d)) + "]");
}

}  // namespace detail

/// Fits the top-m principal components of the rows of x.
inline PcaModel fit_pca(const Matrix& x, std::size_t m, const PcaOptions& opts = {}) {
  detail::check_fit_args(x, m);
  auto dec = detail::decompose(x, opts.route, m);
  if (dec.positive < m)
    throw Error(Errc::RankDeficient, "only " + std::to_string(dec.positive) +
                                         " positive eigenvalues, requested " + std::to_string(m));
  return detail::assemble(std::move(dec), m, opts.standardize);
}

/// Fits with the smallest m whose cumulative explained variance reaches `fraction`.
inline PcaModel fit_pca_explained(const Matrix& x, double fraction, const PcaOptions& opts = {}) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error(Errc::OutOfRange, "explained-variance target must lie in (0, 1]");
  detail::check_fit_args(x, 1);
  const std::size_t cap = std::min(x.rows() - 1, x.cols());
  auto dec = detail::decompose(x, opts.route, cap);
  std::size_t m = 0;
  double acc = 0.0;
  while (m < dec.positive && m < cap) {
    acc += dec.eigenvalues[m++];
    if (acc >= fraction * dec.total_variance * (1.0 - 1e-12)) break;
  }
  return detail::assemble(std::move(dec), std::max<std::size_t>(m, 1), opts.standardize);
}

inline std::vector<double> project(const PcaModel& model, std::span<const double> x) {
  if (x.size() != model.dim())
    throw Error(Errc::DimensionMismatch,
                "vector of length " + std::to_string(x.size()) + ", model expects " + std::to_string(model.dim()));
  std::vector<double> centered(x.begin(), x.end());
  for (std::size_t j = 0; j < centered.size(); ++j) centered[j] -= model.mean[j];
  std::vector<double> coords(model.num_components());
  for (std::size_t c = 0; c < coords.size(); ++c) {
    coords[c] = dot(model.components.row(c), centered);
    if (model.standardize) coords[c] /= model.component_scales[c];
  }
  return coords;
}

inline Matrix project_rows(const PcaModel& model, const Matrix& x) {
  Matrix out(x.rows(), model.num_components());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto coords = project(model, x.row(i));
    std::copy(coords.begin(), coords.end(), out.row(i).begin());
  }
  return out;
}

/// Inverse of project on the component subspace.
inline std::vector<double> reconstruct(const PcaModel& model, std::span<const double> coords) {
  if (coords.size() != model.num_components())
    throw Error(Errc::DimensionMismatch, "coordinate count does not match the model");
  std::vector<double> x = model.mean;
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const double w = model.standardize ? coords[c] * model.component_scales[c] : coords[c];
    auto comp = model.components.row(c);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += w * comp[j];
  }
  return x;
}

/// Fraction of the training set's total variance captured by the first k components.
inline double explained_variance(const PcaModel& model, std::size_t k) {
  if (k < 1 || k > model.num_components())
    throw Error(Errc::OutOfRange, "k=" + std::to_string(k) + " outside [1, " +
                                      std::to_string(model.num_components()) + "]");
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += model.eigenvalues[i];
  return std::clamp(s / model.total_variance, 0.0, 1.0);
}

}  // namespace pairnet
