#pragma once

// Backward Euler convolution quadrature for the Caputo derivative of order
// alpha in (0, 1] on a uniform time grid.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/special.hpp"

namespace subdiff {

class TimeGrid {
 public:
  TimeGrid(double final_time, std::size_t steps) : final_time_(final_time), steps_(steps) {
    if (!(final_time > 0.0) || !std::isfinite(final_time)) throw InvalidArgument("final time must be positive");
    if (steps == 0) throw InvalidArgument("time grid needs at least one step");
    tau_ = final_time_ / static_cast<double>(steps_);
  }

  double final_time() const { return final_time_; }
  std::size_t steps() const { return steps_; }
  double tau() const { return tau_; }
  double t(std::size_t n) const { return n == steps_ ? final_time_ : static_cast<double>(n) * tau_; }

 private:
  double final_time_;
  std::size_t steps_;
  double tau_ = 0.0;
};

/// Weights of (1 - xi)^alpha = sum_j omega_j xi^j, with cached partial sums.
class CQWeights {
 public:
  CQWeights(double alpha, std::size_t steps) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("fractional order must lie in (0, 1]");
    if (steps == 0) throw InvalidArgument("weights need N >= 1");
    omega_.resize(steps + 1);
    sigma_.resize(steps + 1);
    omega_[0] = 1.0;
    for (std::size_t j = 1; j <= steps; ++j)
      omega_[j] = omega_[j - 1] * (static_cast<double>(j) - 1.0 - alpha) / static_cast<double>(j);
    double s = 0.0;
    for (std::size_t j = 0; j <= steps; ++j) {
      s += omega_[j];
      sigma_[j] = s;
    }
  }

  double alpha() const { return alpha_; }
  std::size_t steps() const { return omega_.size() - 1; }
  double omega(std::size_t j) const { return omega_[j]; }
  /// sigma_n = omega_0 + ... + omega_n
  double sigma(std::size_t n) const { return sigma_[n]; }
  std::span<const double> omegas() const { return omega_; }
  std::span<const double> sigmas() const { return sigma_; }

 private:
  double alpha_;
  std::vector<double> omega_;
  std::vector<double> sigma_;
};

inline CQWeights cq_weights(double alpha, std::size_t steps) { return CQWeights(alpha, steps); }

/// (-1)^j Gamma(alpha+1) / (Gamma(alpha-j+1) Gamma(j+1)); validation path only.
inline double cq_weight_closed_form(double alpha, std::size_t j) {
  const double jd = static_cast<double>(j);
  const double sign = j % 2 == 0 ? 1.0 : -1.0;
  return sign * gamma_fn(alpha + 1.0) * rgamma(alpha - jd + 1.0) * rgamma(jd + 1.0);
}

/// tau^{-alpha} * sum_{j=0}^{n} omega_{n-j} (phi^j - phi^0) with n = history.size() - 1.
inline double discrete_caputo(const CQWeights& w, double tau, std::span<const double> history) {
  if (history.empty()) throw InvalidArgument("discrete_caputo needs a non-empty history");
  const std::size_t n = history.size() - 1;
  if (n > w.steps()) throw InvalidArgument("history longer than the weight table");
  double s = 0.0;
  for (std::size_t j = 1; j <= n; ++j) s += w.omega(n - j) * (history[j] - history[0]);
  return std::pow(tau, -w.alpha()) * s;
}

}  // namespace subdiff
