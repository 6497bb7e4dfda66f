#pragma once

// Command layer behind the `subdiff` executable. Kept in a header so tests can
// drive the commands in-process through run_cli().
//
// Exit codes: 0 success, 1 numeric failure, 2 invalid configuration, 3 I/O failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "subdiff/backward_recon.hpp"
#include "subdiff/config.hpp"
#include "subdiff/error.hpp"
#include "subdiff/experiments.hpp"
#include "subdiff/forward_solver.hpp"
#include "subdiff/frac_time.hpp"
#include "subdiff/grid_fem.hpp"
#include "subdiff/problems.hpp"
#include "subdiff/spectral_oracle.hpp"

namespace subdiff::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputRootEnv = "SUBDIFF_OUT";

enum ExitCode : int { kOk = 0, kNumericFailure = 1, kInvalidConfig = 2, kIoFailure = 3 };

class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every recognised key with its default value.
inline const std::vector<std::pair<std::string, std::string>>& default_settings() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"problem.dim", "1"},
      {"problem.M", "9"},
      {"problem.N", "50"},
      {"problem.T", "1"},
      {"problem.alpha", "0.5"},
      {"problem.coefficient", "const:1"},
      {"problem.initial", "smooth"},
      {"problem.source", "none"},
      {"problem.linear_tol", "1e-10"},
      {"forward.dump_states", "false"},
      {"backward.delta", "0"},
      {"backward.seed", "42"},
      {"backward.gamma", "1e-3"},
      {"backward.coupling", "none"},
      {"backward.krylov_tol", "1e-8"},
      {"backward.max_iters", "2000"},
      {"backward.method", "cg"},
      {"backward.auto_fallback", "true"},
      {"backward.observation", "synthetic"},
      {"backward.fine_M", "99"},
      {"backward.fine_N", "500"},
      {"convergence.deltas", "0.01,0.005,0.0025,0.00125"},
      {"convergence.coupling", "smooth_a1"},
      {"convergence.gamma", "1e-3"},
      {"convergence.seed", "42"},
      {"convergence.fine_M", "99"},
      {"convergence.fine_N", "500"},
      {"convergence.noise_free", "false"},
      {"convergence.krylov_tol", "1e-8"},
      {"convergence.max_iters", "2000"},
      {"convergence.method", "cg"},
      {"convergence.threads", "1"},
      {"convergence.synthetic", "false"},
      {"convergence.synthetic_constant", "1"},
      {"convergence.synthetic_rate", "0.5"},
      {"weights.alpha", "0.5"},
      {"weights.N", "10"},
      {"oracle.samples", "11"},
  };
  return table;
}

/// Sections each subcommand reads (and records in its manifest).
inline std::vector<std::string> sections_for(const std::string& command) {
  if (command == "forward") return {"problem", "forward"};
  if (command == "backward") return {"problem", "backward"};
  if (command == "convergence") return {"problem", "convergence"};
  if (command == "weights") return {"weights"};
  if (command == "oracle") return {"problem", "oracle"};
  throw InvalidArgument("unknown command '" + command + "'");
}

inline bool is_known_key(const std::string& key) {
  // manifests carry informational [run] and [resolved] sections
  if (key.starts_with("run.") || key.starts_with("resolved.")) return true;
  const auto& t = default_settings();
  return std::any_of(t.begin(), t.end(), [&](const auto& kv) { return kv.first == key; });
}

/// Defaults overlaid with user values, restricted to the command's sections.
inline Config resolve_settings(const std::string& command, const Config& user) {
  for (const auto& [k, v] : user.entries())
    if (!is_known_key(k)) throw InvalidArgument("unknown config key '" + k + "'");
  const auto sections = sections_for(command);
  Config out;
  for (const auto& [k, v] : default_settings()) {
    const std::string section = k.substr(0, k.find('.'));
    if (std::find(sections.begin(), sections.end(), section) == sections.end()) continue;
    out.set(k, user.get_string(k, v));
  }
  return out;
}

struct RunContext {
  std::string command;
  Config settings;
  std::filesystem::path out_dir;
  bool verbose = false;
  std::ostream* out = &std::cout;
  std::ostream* log = &std::cerr;

  void note(const std::string& msg) const {
    if (verbose) *log << "[subdiff] " << msg << '\n';
  }
};

namespace detail {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoFailure("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open '" + path.string() + "' for writing");
  f << text;
  f.close();
  if (!f) throw IoFailure("failed writing '" + path.string() + "'");
}

/// Comma separated rows with LF endings.
class Csv {
 public:
  explicit Csv(std::initializer_list<std::string> header) { row(std::vector<std::string>(header)); }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += '\n';
  }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

inline std::string num(double v) { return format_double(v); }
inline std::string num(std::size_t v) { return std::to_string(v); }

inline KrylovMethod parse_method(const std::string& s) {
  if (s == "cg") return KrylovMethod::CG;
  if (s == "cgnr") return KrylovMethod::CGNR;
  throw InvalidArgument("unknown Krylov method '" + s + "' (expected cg or cgnr)");
}

inline std::size_t positive_size(const Config& c, const std::string& key) {
  const auto v = c.get_int(key, 0);
  if (v < 1) throw InvalidArgument("config key '" + key + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

inline int dimension(const Config& c) {
  const auto d = c.get_int("problem.dim", 1);
  if (d != 1 && d != 2) throw InvalidArgument("problem.dim must be 1 or 2");
  return static_cast<int>(d);
}

inline void write_manifest(const RunContext& ctx, const Config& extra) {
  Config m = ctx.settings;
  m.set("run.command", ctx.command);
  m.set("run.version", kVersion);
  for (const auto& [k, v] : extra.entries()) m.set(k, v);
  write_file(ctx.out_dir / "manifest.txt", "# subdiff run manifest; re-run with --config <this file>\n" + m.to_text());
}

inline Csv nodal_header_and_rows(const FemSpace& space, std::initializer_list<std::string> header,
                                 const std::vector<const NodalVector*>& columns) {
  Csv csv(header);
  for (std::size_t i = 0; i < space.num_dofs(); ++i) {
    const Point p = space.mesh().nodes()[space.mesh().node_of_dof(i)];
    std::vector<std::string> cells{num(i), num(p.x), num(p.y)};
    for (const auto* c : columns) cells.push_back(num(c->values[i]));
    csv.row(cells);
  }
  return csv;
}

/// Reads nodal values from a CSV whose header names a `value` column
/// (or, without such a column, the last column).
inline std::vector<double> read_nodal_values(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot read observation file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("observation file '" + path + "' is empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.emplace_back(subdiff::detail::trim(cell));
    return cells;
  };
  const auto header = split(line);
  std::size_t col = header.size() - 1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == "value") col = i;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (subdiff::detail::trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() <= col) throw InvalidArgument("observation file '" + path + "' has a short row");
    values.push_back(subdiff::detail::parse_double(cells[col], "observation value"));
  }
  return values;
}

}  // namespace detail

inline int cmd_forward(const RunContext& ctx) {
  const Config& c = ctx.settings;
  const int dim = detail::dimension(c);
  auto space = build_space(dim, detail::positive_size(c, "problem.M"));
  const InitialData u0 = make_initial(c.get_string("problem.initial", "smooth"), dim);
  ForwardProblem problem{space,
                         make_coefficient(c.get_string("problem.coefficient", "")),
                         c.get_double("problem.alpha", 0.5),
                         TimeGrid(c.get_double("problem.T", 1.0), detail::positive_size(c, "problem.N")),
                         make_source(c.get_string("problem.source", "none")),
                         l2_project(*space, u0.field),
                         c.get_double("problem.linear_tol", 1e-10)};
  const bool dump = c.get_bool("forward.dump_states", false);
  detail::ensure_dir(ctx.out_dir);
  ctx.note("forward solve: " + std::to_string(space->num_dofs()) + " dofs, " +
           std::to_string(problem.grid.steps()) + " steps");
  const auto traj = solve_forward(problem);

  detail::Csv csv({"n", "t_n", "l2_norm"});
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    csv.row({detail::num(n), detail::num(traj.grid.t(n)), detail::num(l2_norm(*space, traj.states[n]))});
    if (dump)
      detail::write_file(ctx.out_dir / ("state_" + std::to_string(n) + ".csv"),
                         detail::nodal_header_and_rows(*space, {"dof", "x", "y", "value"}, {&traj.states[n]}).text());
  }
  detail::write_file(ctx.out_dir / "trajectory.csv", csv.text());
  Config extra;
  extra.set("resolved.h", detail::num(space->h()));
  extra.set("resolved.tau", detail::num(problem.grid.tau()));
  extra.set("resolved.dofs", detail::num(space->num_dofs()));
  detail::write_manifest(ctx, extra);
  *ctx.out << "forward: wrote " << traj.states.size() << " rows to " << (ctx.out_dir / "trajectory.csv").string()
           << "; ||U^N|| = " << detail::num(l2_norm(*space, traj.states.back())) << '\n';
  return kOk;
}

inline int cmd_backward(const RunContext& ctx) {
  const Config& c = ctx.settings;
  const int dim = detail::dimension(c);
  const double alpha = c.get_double("problem.alpha", 0.5);
  const double final_time = c.get_double("problem.T", 1.0);
  const double delta = c.get_double("backward.delta", 0.0);
  const auto seed = static_cast<std::uint64_t>(c.get_int("backward.seed", 42));
  const std::string coupling = c.get_string("backward.coupling", "none");

  std::size_t M = detail::positive_size(c, "problem.M");
  std::size_t N = detail::positive_size(c, "problem.N");
  ReconConfig rc;
  rc.gamma = c.get_double("backward.gamma", 1e-3);
  if (coupling != "none") {
    const auto p = couple_params(delta, parse_coupling(coupling), alpha, final_time);
    M = p.M;
    N = p.N;
    rc.gamma = p.gamma;
  }
  rc.krylov_tol = c.get_double("backward.krylov_tol", 1e-8);
  const auto max_iters = c.get_int("backward.max_iters", 2000);
  if (max_iters < 1) throw InvalidArgument("backward.max_iters must be positive");
  rc.max_iters = static_cast<std::size_t>(max_iters);
  rc.method = detail::parse_method(c.get_string("backward.method", "cg"));
  rc.auto_fallback = c.get_bool("backward.auto_fallback", true);
  rc.validate();

  const CoefficientField coeff = make_coefficient(c.get_string("problem.coefficient", ""));
  const auto source = make_source(c.get_string("problem.source", "none"));
  const InitialData u0 = make_initial(c.get_string("problem.initial", "smooth"), dim);
  const double linear_tol = c.get_double("problem.linear_tol", 1e-10);
  auto space = build_space(dim, M);
  const TimeGrid grid(final_time, N);
  detail::ensure_dir(ctx.out_dir);

  NodalVector g;
  const std::string observation = c.get_string("backward.observation", "synthetic");
  if (observation == "synthetic") {
    const auto fine_M = detail::positive_size(c, "backward.fine_M");
    const auto fine_N = detail::positive_size(c, "backward.fine_N");
    if (!(1.0 / static_cast<double>(fine_M + 1) < space->h()) || !(final_time / static_cast<double>(fine_N) < grid.tau()))
      throw InvalidArgument("fine data grid must be strictly finer than the reconstruction grid");
    ctx.note("generating observation on fine grid M=" + std::to_string(fine_M) + " N=" + std::to_string(fine_N));
    auto fine = build_space(dim, fine_M);
    ForwardProblem fp{fine, coeff, alpha, TimeGrid(final_time, fine_N), source, l2_project(*fine, u0.field), linear_tol};
    const auto traj = solve_forward(fp);
    g = transfer(*fine, traj.states.back(), *space);
  } else {
    auto values = detail::read_nodal_values(observation);
    if (values.size() != space->num_dofs())
      throw InvalidArgument("observation has " + std::to_string(values.size()) + " values but the " +
                            std::to_string(dim) + "D space has " + std::to_string(space->num_dofs()) + " dofs");
    g = space->make_vector(std::move(values));
  }
  const auto noisy = add_noise(*space, g, NoiseSpec{delta, seed});
  NodalVector rhs = noisy.values;
  if (source) {
    // remove the source contribution so that the homogeneous terminal map applies
    ForwardProblem zp{space, coeff, alpha, grid, source, space->zeros(), linear_tol};
    axpy(-1.0, solve_forward(zp).states.back().values, rhs.values);
  }

  ForwardProblem problem{space, coeff, alpha, grid, std::nullopt, space->zeros(), linear_tol};
  ctx.note("reconstructing with gamma=" + detail::num(rc.gamma));
  ReconResult res;
  bool converged = true;
  try {
    res = reconstruct(problem, rhs, rc);
  } catch (const NoConvergence& e) {
    res = e.best();
    converged = false;
  }

  const NodalVector projected = l2_project(*space, u0.field);
  NodalVector diff = res.u0;
  axpy(-1.0, projected.values, diff.values);
  detail::write_file(ctx.out_dir / "recon.csv",
                     detail::nodal_header_and_rows(*space, {"dof", "x", "y", "u0_rec", "Ph_u0", "diff"},
                                                   {&res.u0, &projected, &diff})
                         .text());
  const double err = l2_norm(*space, diff);
  const double ref = l2_norm(*space, projected);
  detail::Csv summary({"gamma", "delta", "M", "N", "error", "relative_error", "error_exact", "noise_l2", "iterations",
                       "krylov_residual", "qbv_residual", "rhs_norm", "converged", "method", "fell_back"});
  summary.row({detail::num(rc.gamma), detail::num(delta), detail::num(M), detail::num(N), detail::num(err),
               detail::num(ref > 0.0 ? err / ref : err), detail::num(l2_error(*space, res.u0, u0.field)),
               detail::num(noisy.perturbation_l2), detail::num(res.iterations), detail::num(res.krylov_residual),
               detail::num(res.qbv_residual), detail::num(res.rhs_norm), converged ? "true" : "false",
               to_string(res.method_used), res.fell_back ? "true" : "false"});
  detail::write_file(ctx.out_dir / "summary.csv", summary.text());

  Config extra;
  extra.set("resolved.M", detail::num(M));
  extra.set("resolved.N", detail::num(N));
  extra.set("resolved.gamma", detail::num(rc.gamma));
  extra.set("resolved.noise_l2", detail::num(noisy.perturbation_l2));
  detail::write_manifest(ctx, extra);
  *ctx.out << "backward: error " << detail::num(err) << " after " << res.iterations << " " << to_string(res.method_used)
           << " iterations, converged=" << (converged ? "true" : "false") << '\n';
  return converged ? kOk : kNumericFailure;
}

inline ExperimentSpec experiment_from(const Config& c) {
  ExperimentSpec s;
  s.dim = detail::dimension(c);
  s.coefficient = c.get_string("problem.coefficient", "a1");
  s.alpha = c.get_double("problem.alpha", 0.5);
  s.final_time = c.get_double("problem.T", 1.0);
  s.initial = c.get_string("problem.initial", "smooth");
  s.linear_tol = c.get_double("problem.linear_tol", 1e-10);
  s.deltas = c.get_doubles("convergence.deltas", s.deltas);
  const std::string coupling = c.get_string("convergence.coupling", "smooth_a1");
  if (coupling == "none") {
    s.coupling.reset();
    s.explicit_params = {detail::positive_size(c, "problem.M"), detail::positive_size(c, "problem.N"),
                         c.get_double("convergence.gamma", 1e-3)};
  } else {
    s.coupling = parse_coupling(coupling);
  }
  s.seed = static_cast<std::uint64_t>(c.get_int("convergence.seed", 42));
  s.fine_M = detail::positive_size(c, "convergence.fine_M");
  s.fine_N = detail::positive_size(c, "convergence.fine_N");
  s.noise_free = c.get_bool("convergence.noise_free", false);
  s.krylov_tol = c.get_double("convergence.krylov_tol", 1e-8);
  s.max_iters = detail::positive_size(c, "convergence.max_iters");
  s.method = detail::parse_method(c.get_string("convergence.method", "cg"));
  s.threads = static_cast<unsigned>(detail::positive_size(c, "convergence.threads"));
  if (make_source(c.get_string("problem.source", "none")))
    throw InvalidArgument("convergence studies use the homogeneous problem; set problem.source = none");
  make_coefficient(s.coefficient);
  make_initial(s.initial, s.dim);
  return s;
}

inline std::string rates_csv(const ConvergenceResult& r) {
  detail::Csv csv({"delta", "M", "N", "h", "tau", "gamma", "error", "relative_error", "error_exact", "noise_l2",
                   "iterations", "qbv_residual", "rhs_norm", "converged", "method"});
  for (const auto& e : r.records)
    csv.row({detail::num(e.delta), detail::num(e.M), detail::num(e.N), detail::num(e.h), detail::num(e.tau),
             detail::num(e.gamma), detail::num(e.error), detail::num(e.relative_error), detail::num(e.error_exact),
             detail::num(e.noise_l2), detail::num(e.iterations), detail::num(e.qbv_residual), detail::num(e.rhs_norm),
             e.converged ? "true" : "false", e.method});
  return csv.text();
}

inline std::string fit_text(const ConvergenceResult& r) {
  std::ostringstream os;
  os << "measure = error\n";
  if (!r.fit) {
    os << "status = insufficient_points\n";
    return os.str();
  }
  std::size_t used = 0;
  std::vector<std::pair<double, double>> exact;
  for (const auto& e : r.records)
    if (e.converged && e.error > 0.0) {
      ++used;
      if (e.error_exact > 0.0) exact.emplace_back(e.delta, e.error_exact);
    }
  os << "status = ok\n"
     << "points = " << used << '\n'
     << "slope = " << format_double(r.fit->slope) << '\n'
     << "intercept = " << format_double(r.fit->intercept) << '\n'
     << "residual = " << format_double(r.fit->residual) << '\n';
  if (exact.size() >= 3) os << "slope_exact = " << format_double(fit_rate(exact).slope) << '\n';
  return os.str();
}

inline int cmd_convergence(const RunContext& ctx) {
  const Config& c = ctx.settings;
  ConvergenceResult result;
  Config extra;
  detail::ensure_dir(ctx.out_dir);
  if (c.get_bool("convergence.synthetic", false)) {
    const auto deltas = c.get_doubles("convergence.deltas", {});
    result = synthetic_convergence(deltas, c.get_double("convergence.synthetic_constant", 1.0),
                                   c.get_double("convergence.synthetic_rate", 0.5));
  } else {
    const ExperimentSpec spec = experiment_from(c);
    spec.validate();
    for (std::size_t i = 0; i < spec.deltas.size(); ++i) {
      const auto p = spec.params_for(spec.deltas[i]);
      extra.set("resolved.point_" + std::to_string(i),
                "delta=" + detail::num(spec.deltas[i]) + " M=" + detail::num(p.M) + " N=" + detail::num(p.N) +
                    " gamma=" + detail::num(p.gamma));
    }
    ctx.note("sweep over " + std::to_string(spec.deltas.size()) + " noise levels, fine grid M=" +
             std::to_string(spec.fine_M) + " N=" + std::to_string(spec.fine_N));
    result = run_convergence(spec);
  }
  detail::write_file(ctx.out_dir / "rates.csv", rates_csv(result));
  detail::write_file(ctx.out_dir / "fit.txt", fit_text(result));
  detail::Csv timing({"delta", "wall_seconds"});
  for (const auto& e : result.records) timing.row({detail::num(e.delta), detail::num(e.wall_seconds)});
  detail::write_file(ctx.out_dir / "timing.csv", timing.text());
  detail::write_manifest(ctx, extra);
  if (!result.fit) {
    *ctx.out << "convergence: fewer than three successful points, no rate fitted\n";
    return kNumericFailure;
  }
  *ctx.out << "convergence: " << result.records.size() << " points, slope " << format_double(result.fit->slope)
           << '\n';
  return kOk;
}

inline int cmd_weights(const RunContext& ctx) {
  const Config& c = ctx.settings;
  const CQWeights w(c.get_double("weights.alpha", 0.5), detail::positive_size(c, "weights.N"));
  detail::ensure_dir(ctx.out_dir);
  detail::Csv csv({"j", "omega", "sigma"});
  for (std::size_t j = 0; j <= w.steps(); ++j) csv.row({detail::num(j), detail::num(w.omega(j)), detail::num(w.sigma(j))});
  detail::write_file(ctx.out_dir / "weights.csv", csv.text());
  detail::write_manifest(ctx, {});
  *ctx.out << "weights: wrote " << w.steps() + 1 << " rows to " << (ctx.out_dir / "weights.csv").string() << '\n';
  return kOk;
}

inline int cmd_oracle(const RunContext& ctx) {
  const Config& c = ctx.settings;
  const int dim = detail::dimension(c);
  const std::string coeff = c.get_string("problem.coefficient", "const:1");
  if (!coeff.starts_with("const:")) throw InvalidArgument("the oracle needs a constant coefficient (const:<c>)");
  const double diffusivity = subdiff::detail::parse_double(std::string_view(coeff).substr(6), "diffusivity");
  const InitialData u0 = make_initial(c.get_string("problem.initial", "smooth"), dim);
  if (!u0.sines) throw InvalidArgument("the oracle needs initial data with a finite sine expansion");
  const auto sol = SpectralSolution::from_sines(dim, c.get_double("problem.alpha", 0.5), diffusivity, *u0.sines);
  const double t = c.get_double("problem.T", 1.0);
  const auto samples = detail::positive_size(c, "oracle.samples");
  if (samples < 2) throw InvalidArgument("oracle.samples must be at least 2");
  detail::ensure_dir(ctx.out_dir);

  detail::Csv modes({"k", "l", "lambda", "decay"});
  for (const auto& m : sol.modes())
    modes.row({std::to_string(m.k), std::to_string(dim == 2 ? m.l : 0), detail::num(sol.eigenvalue(m)),
               detail::num(sol.decay(m, t))});
  detail::write_file(ctx.out_dir / "modes.csv", modes.text());

  detail::Csv values({"x", "y", "value"});
  const double step = 1.0 / static_cast<double>(samples - 1);
  const std::size_t rows = dim == 2 ? samples : 1;
  for (std::size_t j = 0; j < rows; ++j)
    for (std::size_t i = 0; i < samples; ++i) {
      const Point p{static_cast<double>(i) * step, dim == 2 ? static_cast<double>(j) * step : kLineEmbeddingY};
      values.row({detail::num(p.x), detail::num(p.y), detail::num(sol.evaluate(p, t))});
    }
  detail::write_file(ctx.out_dir / "oracle.csv", values.text());
  detail::write_manifest(ctx, {});
  *ctx.out << "oracle: " << sol.modes().size() << " modes evaluated at t = " << detail::num(t) << '\n';
  return kOk;
}

/// Parses `--key=value` overrides left over by the option parser. Unqualified
/// keys resolve against the command's own section first, then [problem].
inline void apply_overrides(const std::string& command, const std::vector<std::string>& extras, Config& cfg) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string item = extras[i];
    if (!item.starts_with("--")) throw InvalidArgument("unexpected argument '" + item + "'");
    item = item.substr(2);
    std::string key, value;
    const auto eq = item.find('=');
    if (eq != std::string::npos) {
      key = item.substr(0, eq);
      value = item.substr(eq + 1);
    } else if (i + 1 < extras.size() && !extras[i + 1].starts_with("--")) {
      key = item;
      value = extras[++i];
    } else {
      throw InvalidArgument("override '--" + item + "' needs a value (--key=value)");
    }
    if (key.find('.') == std::string::npos) {
      if (is_known_key(command + "." + key)) {
        key = command + "." + key;
      } else if (is_known_key("problem." + key)) {
        key = "problem." + key;
      }
    }
    if (!is_known_key(key)) throw InvalidArgument("unknown override '--" + key + "'");
    cfg.set(key, value);
  }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Subdiffusion forward solver and initial-state reconstruction", "subdiff"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);
  app.allow_extras();
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::optional<std::int64_t> seed;
  std::optional<std::int64_t> threads;
  bool verbose = false;
  app.add_option("--config", config_path, "configuration file ([section] key = value)");
  app.add_option("--out", out_dir, std::string("output directory (default $") + kOutputRootEnv + "/<command>)");
  app.add_option("--seed", seed, "noise seed");
  app.add_option("--threads", threads, "concurrent sweep points");
  app.add_flag("-v,--verbose", verbose, "progress messages on stderr");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"forward", "solve the forward problem and write trajectory.csv"},
      {"backward", "reconstruct the initial state and write recon.csv"},
      {"convergence", "run a noise-level sweep and write rates.csv and fit.txt"},
      {"weights", "write the convolution quadrature weights as weights.csv"},
      {"oracle", "evaluate the closed-form solution for a constant coefficient"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Config user = config_path.empty() ? Config{} : Config::load(config_path);
    std::vector<std::string> extras = app.remaining();
    const auto sub_extras = app.get_subcommands().front()->remaining();
    extras.insert(extras.end(), sub_extras.begin(), sub_extras.end());
    apply_overrides(command, extras, user);
    if (seed) {
      user.set("backward.seed", std::to_string(*seed));
      user.set("convergence.seed", std::to_string(*seed));
    }
    if (threads) user.set("convergence.threads", std::to_string(*threads));

    RunContext ctx;
    ctx.command = command;
    ctx.settings = resolve_settings(command, user);
    ctx.verbose = verbose;
    ctx.out = &out;
    ctx.log = &err;
    if (!out_dir.empty()) {
      ctx.out_dir = out_dir;
    } else {
      const char* root = std::getenv(kOutputRootEnv);
      ctx.out_dir = std::filesystem::path(root && *root ? root : ".") / command;
    }

    const std::map<std::string, std::function<int(const RunContext&)>> table = {
        {"forward", cmd_forward}, {"backward", cmd_backward}, {"convergence", cmd_convergence},
        {"weights", cmd_weights}, {"oracle", cmd_oracle},
    };
    return table.at(command)(ctx);
  } catch (const IoFailure& e) {
    err << "subdiff: " << e.what() << '\n';
    return kIoFailure;
  } catch (const InvalidArgument& e) {
    err << "subdiff: invalid configuration: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const CoefficientInvalid& e) {
    err << "subdiff: invalid coefficient: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "subdiff: " << e.what() << '\n';
    return kNumericFailure;
  }
}

}  // namespace subdiff::cli
