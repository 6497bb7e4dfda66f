#pragma once

// Closed-form solution for a constant scalar diffusivity c on (0,1)^d with
// homogeneous Dirichlet data: every sine mode decays by E_a(-lambda t^a).

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/grid_fem.hpp"
#include "subdiff/special.hpp"

namespace subdiff {

/// One eigenmode. In 1D `l` is ignored; amplitudes multiply the normalised
/// eigenfunctions sqrt(2) sin(k pi x) (times sqrt(2) sin(l pi y) in 2D).
struct SpectralMode {
  int k = 1;
  int l = 0;
  double amplitude = 0.0;
};

class SpectralSolution {
 public:
  SpectralSolution(int dim, double alpha, double diffusivity, std::vector<SpectralMode> modes)
      : dim_(dim), alpha_(alpha), c_(diffusivity), modes_(std::move(modes)) {
    if (dim != 1 && dim != 2) throw InvalidArgument("spectral oracle supports dimension 1 or 2");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("fractional order must lie in (0, 1]");
    if (!(diffusivity > 0.0)) throw InvalidArgument("diffusivity must be positive");
    for (const auto& m : modes_)
      if (m.k < 1 || (dim == 2 && m.l < 1)) throw InvalidArgument("mode indices start at 1");
  }

  /// Builds the solution for u0 = sum coef * sin(k pi x) [* sin(l pi y)],
  /// i.e. coefficients of plain sines rather than normalised eigenfunctions.
  static SpectralSolution from_sines(int dim, double alpha, double diffusivity, std::vector<SpectralMode> sines) {
    const double norm = dim == 1 ? std::numbers::sqrt2 : 2.0;
    for (auto& m : sines) m.amplitude /= norm;
    return SpectralSolution(dim, alpha, diffusivity, std::move(sines));
  }

  int dim() const { return dim_; }
  double alpha() const { return alpha_; }
  double diffusivity() const { return c_; }
  const std::vector<SpectralMode>& modes() const { return modes_; }

  double eigenvalue(const SpectralMode& m) const {
    const double kk = static_cast<double>(m.k) * m.k + (dim_ == 2 ? static_cast<double>(m.l) * m.l : 0.0);
    return c_ * kk * std::numbers::pi * std::numbers::pi;
  }

  double eigenfunction(const SpectralMode& m, Point p) const {
    double v = std::numbers::sqrt2 * std::sin(m.k * std::numbers::pi * p.x);
    if (dim_ == 2) v *= std::numbers::sqrt2 * std::sin(m.l * std::numbers::pi * p.y);
    return v;
  }

  /// Decay factor E_a(-lambda t^a) of one mode.
  double decay(const SpectralMode& m, double t) const {
    if (t < 0.0) throw InvalidArgument("spectral oracle needs t >= 0");
    if (t == 0.0) return 1.0;
    return mittag_leffler(alpha_, -eigenvalue(m) * std::pow(t, alpha_));
  }

  double evaluate(Point p, double t) const {
    double u = 0.0;
    for (const auto& m : modes_) u += decay(m, t) * m.amplitude * eigenfunction(m, p);
    return u;
  }

  ScalarField at_time(double t) const {
    std::vector<double> factors;
    for (const auto& m : modes_) factors.push_back(decay(m, t) * m.amplitude);
    return [self = *this, factors](Point p) {
      double u = 0.0;
      for (std::size_t i = 0; i < self.modes_.size(); ++i) u += factors[i] * self.eigenfunction(self.modes_[i], p);
      return u;
    };
  }

 private:
  int dim_;
  double alpha_;
  double c_;
  std::vector<SpectralMode> modes_;
};

}  // namespace subdiff
