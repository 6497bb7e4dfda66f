#pragma once

// Fully discrete subdiffusion solver: P1 elements in space, backward Euler
// convolution quadrature in time, diffusion coefficient reassembled at every
// time level. Step n solves
//   (tau^{-a} M + S(t_n)) U^n = F_n + tau^{-a} M (sigma_{n-1} U^0 - sum_{j=1}^{n-1} omega_{n-j} U^j).

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/frac_time.hpp"
#include "subdiff/grid_fem.hpp"
#include "subdiff/sparse.hpp"

namespace subdiff {

using SourceField = std::function<double(Point, double)>;

struct ForwardProblem {
  std::shared_ptr<const FemSpace> space;
  CoefficientField coeff;
  double alpha = 0.5;
  TimeGrid grid;
  std::optional<SourceField> source;
  NodalVector initial;
  /// Relative residual target of every per-step PCG solve.
  double linear_tol = 1e-10;

  void validate() const {
    if (!space) throw InvalidArgument("forward problem has no space");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("fractional order must lie in (0, 1]");
    require_same_space(space->key(), initial.space, "forward problem initial data");
    if (initial.size() != space->num_dofs()) throw InvalidArgument("initial vector length does not match the space");
    if (!(linear_tol > 0.0 && linear_tol < 1.0)) throw InvalidArgument("linear_tol must lie in (0, 1)");
  }
};

struct ForwardTrajectory {
  TimeGrid grid;
  std::vector<NodalVector> states;  // U^0 .. U^N
  std::vector<std::size_t> iterations;  // PCG iterations of step n (index 0 unused)
};

namespace detail {

inline std::size_t solve_step(const CsrMatrix& k, std::span<const double> rhs, std::span<double> x, double tol,
                       std::size_t step, const char* what) {
  const std::size_t cap = 10 * k.size();
  const auto rep = conjugate_gradient(k, rhs, x, tol, cap, true);
  if (!rep.converged) {
    std::ostringstream os;
    os << what << ": PCG did not converge at step " << step << " (relative residual " << rep.relative_residual
       << " after " << rep.iterations << " iterations)";
    throw NumericFailure(os.str());
  }
  return rep.iterations;
}

/// Memory term tau^{-a} M (sigma_{n-1} U^0 - sum_{j=1}^{n-1} omega_{n-j} U^j), added to rhs.
inline void add_history(const CsrMatrix& mass, const CQWeights& w, double scale,
                        const std::vector<std::vector<double>>& states, std::size_t n, std::vector<double>& work,
                        std::vector<double>& rhs) {
  const std::size_t dofs = rhs.size();
  const double s0 = w.sigma(n - 1);
  for (std::size_t i = 0; i < dofs; ++i) work[i] = s0 * states[0][i];
  for (std::size_t j = 1; j < n; ++j) axpy(-w.omega(n - j), states[j], work);
  const auto mw = mass * std::span<const double>(work);
  axpy(scale, mw, rhs);
}

}  // namespace detail

inline ForwardTrajectory solve_forward(const ForwardProblem& problem) {
  problem.validate();
  const FemSpace& space = *problem.space;
  const TimeGrid& grid = problem.grid;
  const std::size_t steps = grid.steps();
  const std::size_t dofs = space.num_dofs();
  const CQWeights w(problem.alpha, steps);
  const double scale = std::pow(grid.tau(), -problem.alpha);

  std::vector<std::vector<double>> states;
  states.reserve(steps + 1);
  states.push_back(problem.initial.values);
  std::vector<std::size_t> iterations(steps + 1, 0);

  CsrMatrix stiffness(space.pattern());
  CsrMatrix system(space.pattern());
  std::vector<double> work(dofs);
  for (std::size_t n = 1; n <= steps; ++n) {
    const double tn = grid.t(n);
    assemble_stiffness_into(space, problem.coeff, tn, stiffness);
    system.assign_combination(scale, space.mass(), 1.0, stiffness);
    std::vector<double> rhs(dofs, 0.0);
    if (problem.source) {
      const auto& f = *problem.source;
      rhs = load_vector(space, [&](Point p) { return f(p, tn); });
    }
    detail::add_history(space.mass(), w, scale, states, n, work, rhs);
    std::vector<double> x = states.back();
    iterations[n] = detail::solve_step(system, rhs, x, problem.linear_tol, n, "solve_forward");
    states.push_back(std::move(x));
  }

  ForwardTrajectory out{grid, {}, std::move(iterations)};
  out.states.reserve(states.size());
  out.states.push_back(problem.initial);
  for (std::size_t n = 1; n < states.size(); ++n) out.states.push_back({space.key(), std::move(states[n])});
  return out;
}

/// The linear map U^0 -> U^N of the homogeneous scheme, with its adjoint in
/// the mass inner product. Step matrices are assembled once and reused.
class TerminalMap {
 public:
  explicit TerminalMap(const ForwardProblem& problem)
      : space_(problem.space), weights_(problem.alpha, problem.grid.steps()), tol_(problem.linear_tol) {
    if (!problem.space) throw InvalidArgument("forward problem has no space");
    if (problem.source) throw InvalidArgument("terminal map requires a problem without source term");
    if (!(problem.alpha > 0.0 && problem.alpha <= 1.0)) throw InvalidArgument("fractional order must lie in (0, 1]");
    scale_ = std::pow(problem.grid.tau(), -problem.alpha);
    const std::size_t steps = problem.grid.steps();
    systems_.reserve(steps + 1);
    systems_.emplace_back();  // no system at n = 0
    CsrMatrix stiffness(space_->pattern());
    for (std::size_t n = 1; n <= steps; ++n) {
      assemble_stiffness_into(*space_, problem.coeff, problem.grid.t(n), stiffness);
      CsrMatrix k(space_->pattern());
      k.assign_combination(scale_, space_->mass(), 1.0, stiffness);
      systems_.push_back(std::move(k));
    }
  }

  const FemSpace& space() const { return *space_; }
  std::size_t steps() const { return weights_.steps(); }

  NodalVector apply(const NodalVector& u0) const {
    require_same_space(space_->key(), u0.space, "terminal_map");
    const std::size_t steps = weights_.steps();
    const std::size_t dofs = space_->num_dofs();
    std::vector<std::vector<double>> states;
    states.reserve(steps + 1);
    states.push_back(u0.values);
    std::vector<double> work(dofs);
    for (std::size_t n = 1; n <= steps; ++n) {
      std::vector<double> rhs(dofs, 0.0);
      detail::add_history(space_->mass(), weights_, scale_, states, n, work, rhs);
      std::vector<double> x = states.back();
      detail::solve_step(systems_[n], rhs, x, tol_, n, "terminal_map");
      states.push_back(std::move(x));
    }
    return {space_->key(), std::move(states.back())};
  }

  /// Adjoint with respect to (x, y)_M = x^T M y: runs the recursion backwards
  /// in time with transposed (here symmetric) step operators.
  NodalVector apply_adjoint(const NodalVector& v) const {
    require_same_space(space_->key(), v.space, "terminal_map adjoint");
    const std::size_t steps = weights_.steps();
    const std::size_t dofs = space_->num_dofs();
    std::vector<std::vector<double>> z(steps + 1, std::vector<double>(dofs, 0.0));
    std::vector<double> work(dofs);
    std::vector<double> result(dofs, 0.0);
    for (std::size_t n = steps; n >= 1; --n) {
      // rhs = delta_{nN} M v - tau^{-a} M sum_{m>n} omega_{m-n} Z^m
      std::fill(work.begin(), work.end(), 0.0);
      if (n == steps) work = v.values;
      for (std::size_t m = n + 1; m <= steps; ++m) axpy(-scale_ * weights_.omega(m - n), z[m], work);
      const auto rhs = space_->mass() * std::span<const double>(work);
      std::vector<double> x = n < steps ? z[n + 1] : std::vector<double>(dofs, 0.0);
      detail::solve_step(systems_[n], rhs, x, tol_, n, "terminal_map adjoint");
      z[n] = std::move(x);
      axpy(scale_ * weights_.sigma(n - 1), z[n], result);
    }
    return {space_->key(), std::move(result)};
  }

 private:
  std::shared_ptr<const FemSpace> space_;
  CQWeights weights_;
  double tol_;
  double scale_ = 1.0;
  std::vector<CsrMatrix> systems_;
};

/// U^N of the homogeneous scheme started from u0h.
inline NodalVector terminal_map(const ForwardProblem& problem, const NodalVector& u0h) {
  return TerminalMap(problem).apply(u0h);
}

}  // namespace subdiff
