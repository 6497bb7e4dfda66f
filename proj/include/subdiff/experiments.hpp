#pragma once

// Noise model, parameter couplings and delta-sweep convergence studies for the
// backward problem.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "subdiff/backward_recon.hpp"
#include "subdiff/error.hpp"
#include "subdiff/forward_solver.hpp"
#include "subdiff/grid_fem.hpp"
#include "subdiff/problems.hpp"

namespace subdiff {

/// Counter-based generator: draw i of stream `seed` is the SplitMix64
/// finalizer applied to seed + (i + 1) * 0x9E3779B97F4A7C15. Uniforms take
/// the top 53 bits, (bits + 0.5) * 2^-53, so they lie strictly inside (0, 1).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t bits(std::uint64_t counter) const { return finalize(seed_ + (counter + 1) * 0x9E3779B97F4A7C15ULL); }

  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal for index i from draws 2i and 2i+1 (Box-Muller, cosine branch).
  double gaussian(std::uint64_t index) const {
    const double u1 = uniform(2 * index);
    const double u2 = uniform(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t seed_;
};

struct NoiseSpec {
  double delta = 0.0;
  std::uint64_t seed = 42;
};

struct NoisyObservation {
  NodalVector values;
  double perturbation_l2 = 0.0;  // ||g_delta - g||_{L2}
  double sup_value = 0.0;        // max over nodes of g
};

/// g_delta = g + eps * delta * max_i g_i with eps_i i.i.d. standard normal per node.
inline NoisyObservation add_noise(const FemSpace& space, const NodalVector& g, const NoiseSpec& spec) {
  require_same_space(space.key(), g.space, "add_noise");
  if (!(spec.delta >= 0.0) || !std::isfinite(spec.delta)) throw InvalidArgument("noise level must be nonnegative");
  NoisyObservation out{g, 0.0, 0.0};
  if (g.values.empty()) return out;
  out.sup_value = *std::max_element(g.values.begin(), g.values.end());
  if (spec.delta == 0.0) return out;
  if (std::all_of(g.values.begin(), g.values.end(), [](double v) { return v == 0.0; }))
    throw DegenerateObservation("cannot scale noise by the supremum of an identically zero observation");
  const CounterRng rng(spec.seed);
  const double scale = spec.delta * out.sup_value;
  NodalVector diff = space.zeros();
  for (std::size_t i = 0; i < g.size(); ++i) {
    diff.values[i] = rng.gaussian(i) * scale;
    out.values.values[i] += diff.values[i];
  }
  out.perturbation_l2 = l2_norm(space, diff);
  return out;
}

enum class CouplingRule { SmoothA1, NonsmoothA1, SmoothA2 };

inline const char* to_string(CouplingRule r) {
  switch (r) {
    case CouplingRule::SmoothA1: return "smooth_a1";
    case CouplingRule::NonsmoothA1: return "nonsmooth_a1";
    case CouplingRule::SmoothA2: return "smooth_a2";
  }
  return "?";
}

inline CouplingRule parse_coupling(std::string_view name) {
  if (name == "smooth_a1") return CouplingRule::SmoothA1;
  if (name == "nonsmooth_a1") return CouplingRule::NonsmoothA1;
  if (name == "smooth_a2") return CouplingRule::SmoothA2;
  throw InvalidArgument("unknown coupling rule '" + std::string(name) + "'");
}

struct CoupledParams {
  std::size_t M = 0;
  std::size_t N = 0;
  double h = 0.0;    // 1/(M+1)
  double tau = 0.0;  // T/N
  double gamma = 0.0;
};

/// Mesh size, time step and regularization tied to the noise level:
///   smooth_a1     h = sqrt(d), tau = sqrt(d)/5,   gamma = sqrt(d)/350
///   nonsmooth_a1  h = sqrt(d), tau = d^0.2/20,    gamma = d^0.8/200
///   smooth_a2     h = sqrt(d), tau = sqrt(d)/5,   gamma = sqrt(d)/150 at alpha = 0.75, else sqrt(d)/350
/// M = round(1/h) - 1 (at least 3), N = round(T/tau) (at least 5).
inline CoupledParams couple_params(double delta, CouplingRule rule, double alpha, double final_time = 1.0) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("coupling needs a noise level in (0, 1)");
  if (!(final_time > 0.0)) throw InvalidArgument("final time must be positive");
  const double root = std::sqrt(delta);
  double tau = root / 5.0;
  double gamma = root / 350.0;
  switch (rule) {
    case CouplingRule::SmoothA1: break;
    case CouplingRule::NonsmoothA1:
      tau = std::pow(delta, 0.2) / 20.0;
      gamma = std::pow(delta, 0.8) / 200.0;
      break;
    case CouplingRule::SmoothA2:
      if (alpha == 0.75) gamma = root / 150.0;
      break;
  }
  CoupledParams p;
  p.M = static_cast<std::size_t>(std::max(3.0, std::round(1.0 / root) - 1.0));
  p.N = static_cast<std::size_t>(std::max(5.0, std::round(final_time / tau)));
  p.h = 1.0 / static_cast<double>(p.M + 1);
  p.tau = final_time / static_cast<double>(p.N);
  p.gamma = gamma;
  return p;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // 2-norm of the log-space residuals
};

/// Least-squares line through (log x, log y).
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw InvalidArgument("rate fit needs at least three points");
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw InvalidArgument("rate fit needs positive values");
    sx += std::log(x);
    sy += std::log(y);
  }
  const double n = static_cast<double>(points.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y) - my);
  }
  if (sxx == 0.0) throw InvalidArgument("rate fit needs distinct abscissae");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (const auto& [x, y] : points) {
    const double r = std::log(y) - (fit.intercept + fit.slope * std::log(x));
    rss += r * r;
  }
  fit.residual = std::sqrt(rss);
  return fit;
}

struct ExplicitParams {
  std::size_t M = 9;
  std::size_t N = 50;
  double gamma = 1e-3;
};

struct ExperimentSpec {
  int dim = 2;
  std::string coefficient = "a1";
  double alpha = 0.5;
  double final_time = 1.0;
  std::string initial = "smooth";
  std::vector<double> deltas{1e-2, 5e-3, 2.5e-3, 1.25e-3};
  std::optional<CouplingRule> coupling = CouplingRule::SmoothA1;
  ExplicitParams explicit_params;  // used when coupling is empty
  std::uint64_t seed = 42;
  std::size_t fine_M = 99;
  std::size_t fine_N = 500;
  bool noise_free = false;
  double krylov_tol = 1e-8;
  std::size_t max_iters = 2000;
  KrylovMethod method = KrylovMethod::CG;
  double linear_tol = 1e-10;
  unsigned threads = 1;

  CoupledParams params_for(double delta) const {
    if (coupling) return couple_params(delta, *coupling, alpha, final_time);
    CoupledParams p;
    p.M = explicit_params.M;
    p.N = explicit_params.N;
    p.h = 1.0 / static_cast<double>(p.M + 1);
    p.tau = final_time / static_cast<double>(p.N);
    p.gamma = explicit_params.gamma;
    return p;
  }

  void validate() const {
    if (dim != 1 && dim != 2) throw InvalidArgument("dimension must be 1 or 2");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("fractional order must lie in (0, 1]");
    if (!(final_time > 0.0)) throw InvalidArgument("final time must be positive");
    if (deltas.empty()) throw InvalidArgument("delta list is empty");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      if (!(deltas[i] > 0.0 && deltas[i] < 1.0)) throw InvalidArgument("noise levels must lie in (0, 1)");
      if (i > 0 && !(deltas[i] < deltas[i - 1])) throw InvalidArgument("delta list must be strictly decreasing");
    }
    const double fine_h = 1.0 / static_cast<double>(fine_M + 1);
    const double fine_tau = final_time / static_cast<double>(fine_N);
    for (double d : deltas) {
      const auto p = params_for(d);
      if (!(fine_h < p.h) || !(fine_tau < p.tau))
        throw InvalidArgument("fine data grid must be strictly finer than every experiment grid");
    }
  }
};

struct ErrorRecord {
  double delta = 0.0;
  std::size_t M = 0;
  std::size_t N = 0;
  double h = 0.0;
  double tau = 0.0;
  double gamma = 0.0;
  double error = 0.0;           // ||u0_rec - P_h u0||_{L2}
  double relative_error = 0.0;  // error / ||P_h u0||_{L2}
  double error_exact = 0.0;     // ||u0_rec - u0||_{L2} by quadrature
  double noise_l2 = 0.0;        // realized ||g_delta - g||_{L2}
  std::size_t iterations = 0;
  double qbv_residual = 0.0;
  double rhs_norm = 0.0;
  bool converged = false;
  std::string method;
  double wall_seconds = 0.0;
};

struct ConvergenceResult {
  std::vector<ErrorRecord> records;
  std::optional<RateFit> fit;
};

inline std::optional<RateFit> fit_records(const std::vector<ErrorRecord>& records) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : records)
    if (r.converged && r.error > 0.0) pts.emplace_back(r.delta, r.error);
  if (pts.size() < 3) return std::nullopt;
  return fit_rate(pts);
}

/// Terminal observation of the fine-grid forward solve from the exact initial data.
struct FineData {
  std::shared_ptr<const FemSpace> space;
  NodalVector terminal;
};

inline FineData solve_fine_data(const ExperimentSpec& spec) {
  const InitialData u0 = make_initial(spec.initial, spec.dim);
  auto fine = build_space(spec.dim, spec.fine_M);
  ForwardProblem problem{fine,
                         make_coefficient(spec.coefficient),
                         spec.alpha,
                         TimeGrid(spec.final_time, spec.fine_N),
                         std::nullopt,
                         l2_project(*fine, u0.field),
                         spec.linear_tol};
  auto traj = solve_forward(problem);
  return {fine, std::move(traj.states.back())};
}

/// One sweep point: transfer, perturb, reconstruct and measure.
inline ErrorRecord run_sweep_point(const ExperimentSpec& spec, const FineData& data, double delta) {
  const auto start = std::chrono::steady_clock::now();
  const InitialData u0 = make_initial(spec.initial, spec.dim);
  const CoupledParams p = spec.params_for(delta);
  auto space = build_space(spec.dim, p.M);
  const NodalVector g = transfer(*data.space, data.terminal, *space);
  const auto noisy = add_noise(*space, g, NoiseSpec{spec.noise_free ? 0.0 : delta, spec.seed});

  ForwardProblem problem{space,         make_coefficient(spec.coefficient), spec.alpha, TimeGrid(spec.final_time, p.N),
                         std::nullopt,  space->zeros(),                    spec.linear_tol};
  ReconConfig cfg;
  cfg.gamma = p.gamma;
  cfg.krylov_tol = spec.krylov_tol;
  cfg.max_iters = spec.max_iters;
  cfg.method = spec.method;

  ReconResult res;
  try {
    res = reconstruct(problem, noisy.values, cfg);
  } catch (const NoConvergence& e) {
    res = e.best();
  }
  const NodalVector projected = l2_project(*space, u0.field);
  NodalVector diff = res.u0;
  axpy(-1.0, projected.values, diff.values);

  ErrorRecord r;
  r.delta = delta;
  r.M = p.M;
  r.N = p.N;
  r.h = p.h;
  r.tau = p.tau;
  r.gamma = p.gamma;
  r.error = l2_norm(*space, diff);
  const double ref = l2_norm(*space, projected);
  r.relative_error = ref > 0.0 ? r.error / ref : r.error;
  r.error_exact = l2_error(*space, res.u0, u0.field);
  r.noise_l2 = noisy.perturbation_l2;
  r.iterations = res.iterations;
  r.qbv_residual = res.qbv_residual;
  r.rhs_norm = res.rhs_norm;
  r.converged = res.converged;
  r.method = to_string(res.method_used);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Full sweep. Points may run concurrently; records come back in delta order.
inline ConvergenceResult run_convergence(const ExperimentSpec& spec) {
  spec.validate();
  const FineData data = solve_fine_data(spec);
  ConvergenceResult out;
  out.records.resize(spec.deltas.size());
  const std::size_t workers = std::max(1u, spec.threads);
  for (std::size_t first = 0; first < spec.deltas.size(); first += workers) {
    const std::size_t last = std::min(spec.deltas.size(), first + workers);
    if (workers == 1) {
      out.records[first] = run_sweep_point(spec, data, spec.deltas[first]);
      continue;
    }
    std::vector<std::future<ErrorRecord>> jobs;
    for (std::size_t i = first; i < last; ++i)
      jobs.push_back(std::async(std::launch::async, [&, i] { return run_sweep_point(spec, data, spec.deltas[i]); }));
    for (std::size_t i = first; i < last; ++i) out.records[i] = jobs[i - first].get();
  }
  out.fit = fit_records(out.records);
  return out;
}

/// Records following error = constant * delta^rate exactly, for checking the
/// rate pipeline without any solves.
inline ConvergenceResult synthetic_convergence(const std::vector<double>& deltas, double constant, double rate) {
  ConvergenceResult out;
  for (double d : deltas) {
    ErrorRecord r;
    r.delta = d;
    r.error = constant * std::pow(d, rate);
    r.relative_error = r.error;
    r.error_exact = r.error;
    r.converged = true;
    r.method = "synthetic";
    out.records.push_back(r);
  }
  out.fit = fit_records(out.records);
  return out;
}

}  // namespace subdiff
