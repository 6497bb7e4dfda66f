#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "subdiff/error.hpp"

namespace subdiff {

/// Compressed-row sparsity pattern. Column indices are sorted within each row.
struct CsrPattern {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col;

  std::size_t nnz() const { return col.size(); }

  /// Position of (i, j) in the value array; npos if structurally zero.
  std::size_t find(std::size_t i, std::size_t j) const {
    auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return npos;
    return static_cast<std::size_t>(it - col.begin());
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Square sparse matrix over a shared pattern. Symmetric operators are stored
/// in full (both triangles) so matvec is a plain row sweep.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  explicit CsrMatrix(std::shared_ptr<const CsrPattern> pattern)
      : pattern_(std::move(pattern)), values_(pattern_->nnz(), 0.0) {}

  std::size_t size() const { return pattern_ ? pattern_->n : 0; }
  const CsrPattern& pattern() const { return *pattern_; }
  const std::shared_ptr<const CsrPattern>& shared_pattern() const { return pattern_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double operator()(std::size_t i, std::size_t j) const {
    const auto k = pattern_->find(i, j);
    return k == CsrPattern::npos ? 0.0 : values_[k];
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    const auto& p = *pattern_;
    for (std::size_t i = 0; i < p.n; ++i) {
      double s = 0.0;
      for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) s += values_[k] * x[p.col[k]];
      y[i] = s;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(size());
    multiply(x, y);
    return y;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (*this)(i, i);
    return d;
  }

  /// this = a*x + b*y, all on the same pattern.
  void assign_combination(double a, const CsrMatrix& x, double b, const CsrMatrix& y) {
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] = a * x.values_[k] + b * y.values_[k];
  }

  bool is_symmetric() const {
    const auto& p = *pattern_;
    for (std::size_t i = 0; i < p.n; ++i)
      for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k)
        if (values_[k] != (*this)(p.col[k], i)) return false;
    return true;
  }

 private:
  std::shared_ptr<const CsrPattern> pattern_;
  std::vector<double> values_;
};

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

/// y += a*x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

struct CgReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Conjugate gradients for an SPD matrix, optionally Jacobi preconditioned.
/// x holds the initial guess on entry. Convergence is measured as
/// ||b - A x||_2 <= tol * ||b||_2; a zero right-hand side returns x = 0.
inline CgReport conjugate_gradient(const CsrMatrix& a, std::span<const double> b, std::span<double> x,
                                   double tol, std::size_t max_iters, bool jacobi = false) {
  const std::size_t n = a.size();
  CgReport rep;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    rep.converged = true;
    return rep;
  }
  std::vector<double> inv_diag;
  if (jacobi) {
    inv_diag = a.diagonal();
    for (auto& d : inv_diag) d = 1.0 / d;
  }
  std::vector<double> r(n), z(n), p(n), q(n);
  a.multiply(x, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  double rnorm = norm2(r);
  rep.relative_residual = rnorm / bnorm;
  if (rep.relative_residual <= tol) {
    rep.converged = true;
    return rep;
  }
  auto precondition = [&] {
    if (jacobi)
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    else
      std::copy(r.begin(), r.end(), z.begin());
  };
  precondition();
  p = z;
  double rz = dot(r, z);
  while (rep.iterations < max_iters) {
    a.multiply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) break;
    const double step = rz / pq;
    axpy(step, p, x);
    axpy(-step, q, r);
    ++rep.iterations;
    rnorm = norm2(r);
    rep.relative_residual = rnorm / bnorm;
    if (rep.relative_residual <= tol) {
      rep.converged = true;
      break;
    }
    precondition();
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return rep;
}

}  // namespace subdiff
