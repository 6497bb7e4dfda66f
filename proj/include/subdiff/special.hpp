#pragma once

// Gamma function and the one-parameter Mittag-Leffler function E_a(z) on the
// real line, as needed by the weight checks and the spectral oracle.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

#include "subdiff/error.hpp"

namespace subdiff {

namespace detail {

/// sin(pi x) with exact argument reduction, so large |x| keeps full accuracy.
inline double sin_pi(double x) {
  double r = std::fmod(x, 2.0);  // exact
  if (r < 0.0) r += 2.0;
  if (r == 0.0 || r == 1.0) return 0.0;
  if (r > 1.0) return -sin_pi(r - 1.0);
  if (r > 0.5) r = 1.0 - r;
  return std::sin(std::numbers::pi * r);
}

inline bool is_nonpositive_integer(double x) { return x <= 0.0 && std::floor(x) == x; }

}  // namespace detail

/// Lanczos approximation (g = 7, 9 coefficients) with reflection below 1/2.
inline double gamma_fn(double x) {
  static constexpr double g = 7.0;
  static constexpr std::array<double, 9> c = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (detail::is_nonpositive_integer(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x < 0.5) return std::numbers::pi / (detail::sin_pi(x) * gamma_fn(1.0 - x));
  x -= 1.0;
  double a = c[0];
  const double t = x + g + 0.5;
  for (std::size_t i = 1; i < c.size(); ++i) a += c[i] / (x + static_cast<double>(i));
  // split the power so Gamma(171) does not overflow in the intermediate
  const double half = std::pow(t, 0.5 * (x + 0.5));
  return std::sqrt(2.0 * std::numbers::pi) * half * (half * std::exp(-t)) * a;
}

/// 1/Gamma(x); zero at the poles.
inline double rgamma(double x) {
  if (detail::is_nonpositive_integer(x)) return 0.0;
  return 1.0 / gamma_fn(x);
}

namespace detail {

struct QuadratureEstimate {
  double value = 0.0;
  double error = 0.0;
};

/// One Gauss-Kronrod 7/15 panel on [a, b].
template <class F>
QuadratureEstimate gauss_kronrod15(const F& f, double a, double b) {
  static constexpr std::array<double, 8> xk = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.0};
  static constexpr std::array<double, 8> wk = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg = {0.129484966168869693270611432679082,
                                               0.279705391489276667901467771423780,
                                               0.381830050505118944950369775488975,
                                               0.417959183673469387755102040816327};
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(mid);
  double kronrod = wk[7] * fc;
  double gauss = wg[3] * fc;
  for (std::size_t i = 0; i < 7; ++i) {
    const double dx = half * xk[i];
    const double pair = f(mid - dx) + f(mid + dx);
    kronrod += wk[i] * pair;
    if (i % 2 == 1) gauss += wg[i / 2] * pair;
  }
  return {kronrod * half, std::abs((kronrod - gauss) * half)};
}

/// Globally adaptive G7-K15: bisects the panel with the largest error until the
/// summed estimate meets rel_tol * |I| or the panel budget runs out.
template <class F>
double integrate_adaptive(const F& f, double a, double b, double rel_tol, std::size_t max_panels = 4000) {
  struct Panel {
    double a, b;
    QuadratureEstimate est;
    bool operator<(const Panel& o) const { return est.error < o.est.error; }
  };
  std::priority_queue<Panel> panels;
  Panel first{a, b, gauss_kronrod15(f, a, b)};
  double value = first.est.value;
  double error = first.est.error;
  panels.push(first);
  while (error > rel_tol * std::abs(value) && panels.size() < max_panels) {
    const Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Panel left{worst.a, mid, gauss_kronrod15(f, worst.a, mid)};
    Panel right{mid, worst.b, gauss_kronrod15(f, mid, worst.b)};
    value += left.est.value + right.est.value - worst.est.value;
    error += left.est.error + right.est.error - worst.est.error;
    panels.push(left);
    panels.push(right);
  }
  // re-sum to shed the drift of the running updates
  value = 0.0;
  while (!panels.empty()) {
    value += panels.top().est.value;
    panels.pop();
  }
  return value;
}

inline double ml_series(double alpha, double z) {
  double sum = 0.0;
  double zk = 1.0;
  for (int k = 0; k < 5000; ++k) {
    const double term = zk * rgamma(alpha * k + 1.0);
    sum += term;
    if (k > 2 && std::abs(term) < 1e-17 * std::max(1.0, std::abs(sum)) && alpha * k > 2.0) break;
    zk *= z;
  }
  return sum;
}

/// Algebraic expansion -sum_{k=1..K} z^{-k}/Gamma(1 - a k), K = floor(15/a).
inline double ml_asymptotic(double alpha, double z) {
  const int terms = static_cast<int>(std::floor(15.0 / alpha));
  double sum = 0.0;
  double zk = 1.0;
  for (int k = 1; k <= terms; ++k) {
    zk /= z;
    sum -= zk * rgamma(1.0 - alpha * k);
  }
  return sum;
}

/// E_a(-x) for x > 0, 0 < a < 1, from the Laplace-type representation
///   E_a(-x) = sin(a pi)/(a pi) * int_0^inf exp(-v^{1/a}) x / (v^2 + 2 x v cos(a pi) + x^2) dv,
/// which is smooth in v; the interval is split at the peak of the rational factor.
inline double ml_integral(double alpha, double x) {
  const double c = std::cos(std::numbers::pi * alpha);
  const double s = std::sin(std::numbers::pi * alpha);
  auto f = [&](double v) {
    const double e = std::exp(-std::pow(v, 1.0 / alpha));
    if (e == 0.0) return 0.0;
    return e * x / (v * v + 2.0 * x * v * c + x * x);
  };
  // exp(-v^{1/a}) is below 1e-300 once v > 700^a
  const double vmax = std::pow(700.0, alpha);
  const double peak = c < 0.0 ? -x * c : 0.0;
  double total = 0.0;
  if (peak > 0.0 && peak < vmax) {
    total = integrate_adaptive(f, 0.0, peak, 1e-14) + integrate_adaptive(f, peak, vmax, 1e-14);
  } else {
    const double knee = std::min(1.0, vmax);
    total = integrate_adaptive(f, 0.0, knee, 1e-14) + integrate_adaptive(f, knee, vmax, 1e-14);
  }
  return s / (alpha * std::numbers::pi) * total;
}

}  // namespace detail

/// Series / integral switch: power series on [-1, 1], the integral
/// representation on (-50, -1), the algebraic expansion on (-inf, -50].
inline constexpr double kMittagLefflerSeriesRadius = 1.0;
inline constexpr double kMittagLefflerAsymptoticStart = 50.0;

/// One-parameter Mittag-Leffler function E_{a,1}(z) for real z <= 1.
/// Absolute accuracy target 1e-10.
inline double mittag_leffler(double alpha, double z) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("Mittag-Leffler order must lie in (0, 1]");
  if (!std::isfinite(z) || z > kMittagLefflerSeriesRadius) {
    std::ostringstream os;
    os << "Mittag-Leffler argument " << z << " outside the supported range (-inf, " << kMittagLefflerSeriesRadius
       << "]";
    throw UnsupportedArgument(os.str());
  }
  if (alpha == 1.0) return std::exp(z);
  if (z >= -kMittagLefflerSeriesRadius) return detail::ml_series(alpha, z);
  if (z <= -kMittagLefflerAsymptoticStart) return detail::ml_asymptotic(alpha, z);
  return detail::ml_integral(alpha, -z);
}

}  // namespace subdiff
