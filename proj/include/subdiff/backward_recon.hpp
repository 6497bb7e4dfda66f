#pragma once

// Quasi-boundary-value reconstruction of the initial state: find u0 with
//   gamma * u0 + S_h u0 = g
// where S_h is the terminal map of the homogeneous fully discrete scheme.
// The system is solved matrix-free in the mass (discrete L2) inner product.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/forward_solver.hpp"
#include "subdiff/grid_fem.hpp"
#include "subdiff/sparse.hpp"

namespace subdiff {

enum class KrylovMethod { CG, CGNR };

inline const char* to_string(KrylovMethod m) { return m == KrylovMethod::CG ? "cg" : "cgnr"; }

struct ReconConfig {
  double gamma = 1e-3;
  double krylov_tol = 1e-8;
  std::size_t max_iters = 2000;
  KrylovMethod method = KrylovMethod::CG;
  /// Switch CG to CGNR when it stagnates or breaks down.
  bool auto_fallback = true;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("regularization parameter gamma must be positive");
    if (!(krylov_tol > 0.0 && krylov_tol < 1.0)) throw InvalidArgument("krylov_tol must lie in (0, 1)");
    if (max_iters == 0) throw InvalidArgument("max_iters must be positive");
  }
};

struct ReconResult {
  NodalVector u0;
  std::size_t iterations = 0;
  /// Relative residual reported by the Krylov recurrence.
  double krylov_residual = 0.0;
  /// ||gamma u0 + S_h u0 - g||_{L2}, recomputed from scratch.
  double qbv_residual = 0.0;
  double rhs_norm = 0.0;
  bool converged = false;
  KrylovMethod method_used = KrylovMethod::CG;
  bool fell_back = false;
};

/// Raised when the Krylov loop runs out of iterations; carries the best iterate.
class NoConvergence : public NumericFailure {
 public:
  explicit NoConvergence(ReconResult best)
      : NumericFailure("reconstruction did not reach the Krylov tolerance (relative residual " +
                       std::to_string(best.rhs_norm > 0 ? best.qbv_residual / best.rhs_norm : 0.0) + ")"),
        best_(std::move(best)) {}
  const ReconResult& best() const { return best_; }

 private:
  ReconResult best_;
};

/// gamma I + S_h and its adjoint in the mass inner product.
class QbvOperator {
 public:
  QbvOperator(const ForwardProblem& problem, double gamma) : map_(problem), gamma_(gamma) {
    if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be nonnegative");
  }

  const FemSpace& space() const { return map_.space(); }
  double gamma() const { return gamma_; }
  const TerminalMap& terminal_map() const { return map_; }

  NodalVector apply(const NodalVector& v) const {
    NodalVector out = map_.apply(v);
    axpy(gamma_, v.values, out.values);
    return out;
  }

  NodalVector apply_adjoint(const NodalVector& v) const {
    NodalVector out = map_.apply_adjoint(v);
    axpy(gamma_, v.values, out.values);
    return out;
  }

  double inner(const NodalVector& x, const NodalVector& y) const {
    const auto my = space().mass() * std::span<const double>(y.values);
    return dot(x.values, my);
  }
  double norm(const NodalVector& x) const { return std::sqrt(std::max(0.0, inner(x, x))); }

 private:
  TerminalMap map_;
  double gamma_;
};

inline NodalVector apply_qbv_operator(const ForwardProblem& problem, const ReconConfig& cfg, const NodalVector& v) {
  return QbvOperator(problem, cfg.gamma).apply(v);
}

namespace detail {

inline NodalVector residual(const QbvOperator& op, const NodalVector& rhs, const NodalVector& x) {
  NodalVector r = op.apply(x);
  for (std::size_t i = 0; i < r.size(); ++i) r.values[i] = rhs.values[i] - r.values[i];
  return r;
}

struct KrylovState {
  NodalVector x;
  std::size_t iterations = 0;
  double recurrence_residual = 0.0;
  bool converged = false;
};

inline KrylovState run_cgnr(const QbvOperator& op, const NodalVector& b, double bnorm, NodalVector x,
                            std::size_t used, const ReconConfig& cfg) {
  KrylovState st{std::move(x), used, 0.0, false};
  NodalVector r = residual(op, b, st.x);
  st.recurrence_residual = op.norm(r) / bnorm;
  if (st.recurrence_residual <= cfg.krylov_tol) {
    st.converged = true;
    return st;
  }
  NodalVector s = op.apply_adjoint(r);
  NodalVector p = s;
  double gs = op.inner(s, s);
  while (st.iterations < cfg.max_iters) {
    const NodalVector q = op.apply(p);
    const double qq = op.inner(q, q);
    if (!(qq > 0.0)) break;
    const double a = gs / qq;
    axpy(a, p.values, st.x.values);
    axpy(-a, q.values, r.values);
    ++st.iterations;
    st.recurrence_residual = op.norm(r) / bnorm;
    if (st.recurrence_residual <= cfg.krylov_tol) {
      st.converged = true;
      break;
    }
    s = op.apply_adjoint(r);
    const double gs_new = op.inner(s, s);
    const double beta = gs_new / gs;
    gs = gs_new;
    for (std::size_t i = 0; i < p.size(); ++i) p.values[i] = s.values[i] + beta * p.values[i];
  }
  return st;
}

}  // namespace detail

/// Solves (gamma I + S_h) u0 = g_obs. The problem's own initial vector and
/// source are ignored/forbidden respectively: S_h needs f = 0.
inline ReconResult reconstruct(const QbvOperator& op, const NodalVector& g_obs, const ReconConfig& cfg) {
  cfg.validate();
  if (op.gamma() != cfg.gamma) throw InvalidArgument("operator and config disagree on gamma");
  require_same_space(op.space().key(), g_obs.space, "reconstruct");

  ReconResult res;
  res.rhs_norm = op.norm(g_obs);
  res.method_used = cfg.method;
  if (res.rhs_norm == 0.0) {
    res.u0 = op.space().zeros();
    res.converged = true;
    return res;
  }
  const double bnorm = res.rhs_norm;
  // the recurrence residual may drift from the true one; accept on the latter
  auto true_residual = [&](const NodalVector& x) { return op.norm(detail::residual(op, g_obs, x)); };
  const double accept = 10.0 * cfg.krylov_tol * bnorm;

  detail::KrylovState st{op.space().zeros(), 0, 1.0, false};
  bool need_fallback = cfg.method == KrylovMethod::CGNR;
  if (cfg.method == KrylovMethod::CG) {
    NodalVector r = g_obs;
    NodalVector p = r;
    double rr = op.inner(r, r);
    std::vector<double> history{1.0};
    while (st.iterations < cfg.max_iters) {
      const NodalVector q = op.apply(p);
      const double pq = op.inner(p, q);
      if (!(pq > 0.0)) {
        need_fallback = cfg.auto_fallback;
        break;
      }
      const double a = rr / pq;
      axpy(a, p.values, st.x.values);
      axpy(-a, q.values, r.values);
      ++st.iterations;
      const double rr_new = op.inner(r, r);
      st.recurrence_residual = std::sqrt(std::max(0.0, rr_new)) / bnorm;
      history.push_back(st.recurrence_residual);
      if (st.recurrence_residual <= cfg.krylov_tol) {
        if (true_residual(st.x) <= accept) {
          st.converged = true;
        } else {
          need_fallback = cfg.auto_fallback;
        }
        break;
      }
      const std::size_t k = history.size() - 1;
      if (cfg.auto_fallback && k >= 10 && history[k] > 0.99 * history[k - 10]) {
        need_fallback = true;
        break;
      }
      const double beta = rr_new / rr;
      rr = rr_new;
      for (std::size_t i = 0; i < p.size(); ++i) p.values[i] = r.values[i] + beta * p.values[i];
    }
  }
  if (need_fallback && !st.converged) {
    res.fell_back = cfg.method == KrylovMethod::CG;
    res.method_used = KrylovMethod::CGNR;
    st = detail::run_cgnr(op, g_obs, bnorm, std::move(st.x), st.iterations, cfg);
    if (st.converged && true_residual(st.x) > accept) st.converged = false;
  }

  res.u0 = std::move(st.x);
  res.iterations = st.iterations;
  res.krylov_residual = st.recurrence_residual;
  res.qbv_residual = true_residual(res.u0);
  res.converged = st.converged && res.qbv_residual <= accept;
  if (!res.converged) throw NoConvergence(std::move(res));
  return res;
}

inline ReconResult reconstruct(const ForwardProblem& problem, const NodalVector& g_obs, const ReconConfig& cfg) {
  cfg.validate();
  return reconstruct(QbvOperator(problem, cfg.gamma), g_obs, cfg);
}

}  // namespace subdiff
