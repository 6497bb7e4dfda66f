#pragma once

// Built-in diffusion coefficients and initial data, addressable by id:
//   coefficients  a1, a2, const:<c>
//   initial data  smooth, nonsmooth, zero, modes:<k:c,...> (2D: modes:<kxl:c,...>)
//   sources       none, const:<c>

#include <cmath>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/grid_fem.hpp"
#include "subdiff/spectral_oracle.hpp"

namespace subdiff {

/// a1(x,y,t) = [[y sin(sqrt(1+t)) + 2, -0.1], [-0.1, sin(pi x)(t+1.2)^{-0.8} + 2]]
inline CoefficientField coefficient_a1() {
  return CoefficientField(
      "a1",
      [](Point p, double t) {
        return SymMatrix2{p.y * std::sin(std::sqrt(1.0 + t)) + 2.0, -0.1,
                          std::sin(std::numbers::pi * p.x) * std::pow(t + 1.2, -0.8) + 2.0};
      },
      1.5, 3.5);
}

/// a2(x,y,t) = [[e^{-x} cos t + 2, b(t)], [b(t), cos(pi y) sin t + 2]], b(t) = (1.5 - (t+1)^{-0.2})/10
inline CoefficientField coefficient_a2() {
  return CoefficientField(
      "a2",
      [](Point p, double t) {
        const double off = (1.5 - std::pow(t + 1.0, -0.2)) / 10.0;
        return SymMatrix2{std::exp(-p.x) * std::cos(t) + 2.0, off,
                          std::cos(std::numbers::pi * p.y) * std::sin(t) + 2.0};
      },
      0.5, 3.5);
}

namespace detail {

inline double parse_double(std::string_view text, const std::string& what) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) throw InvalidArgument("cannot parse " + what + " '" + s + "'");
  return v;
}

inline int parse_int(std::string_view text, const std::string& what) {
  const double v = parse_double(text, what);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw InvalidArgument(what + " must be an integer");
  return static_cast<int>(v);
}

}  // namespace detail

inline CoefficientField make_coefficient(std::string_view id) {
  if (id == "a1") return coefficient_a1();
  if (id == "a2") return coefficient_a2();
  if (id.starts_with("const:")) return CoefficientField::constant(detail::parse_double(id.substr(6), "diffusivity"));
  throw InvalidArgument("unknown coefficient id '" + std::string(id) + "' (expected a1, a2 or const:<c>)");
}

/// Initial condition together with its sine expansion when it has a finite one.
struct InitialData {
  std::string id;
  int dim = 1;
  ScalarField field;
  std::optional<std::vector<SpectralMode>> sines;
};

inline InitialData make_sine_initial(std::string id, int dim, std::vector<SpectralMode> sines) {
  auto field = [dim, sines](Point p) {
    double u = 0.0;
    for (const auto& m : sines) {
      double v = m.amplitude * std::sin(m.k * std::numbers::pi * p.x);
      if (dim == 2) v *= std::sin(m.l * std::numbers::pi * p.y);
      u += v;
    }
    return u;
  };
  return {std::move(id), dim, field, sines};
}

inline InitialData make_initial(std::string_view id, int dim) {
  if (dim != 1 && dim != 2) throw InvalidArgument("dimension must be 1 or 2");
  if (id == "smooth") {
    // sin(2 pi x) sin(2 pi y), or sin(2 pi x) in 1D
    return make_sine_initial("smooth", dim, {SpectralMode{2, dim == 2 ? 2 : 0, 1.0}});
  }
  if (id == "nonsmooth") return {"nonsmooth", dim, [](Point p) { return p.x >= 0.5 ? 1.0 : 0.0; }, std::nullopt};
  if (id == "zero") return {"zero", dim, [](Point) { return 0.0; }, std::vector<SpectralMode>{}};
  if (id.starts_with("modes:")) {
    std::vector<SpectralMode> modes;
    std::string_view rest = id.substr(6);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      const auto colon = item.find(':');
      if (colon == std::string_view::npos) throw InvalidArgument("mode entry '" + std::string(item) + "' lacks ':'");
      const std::string_view index = item.substr(0, colon);
      SpectralMode m;
      m.amplitude = detail::parse_double(item.substr(colon + 1), "mode coefficient");
      if (dim == 2) {
        const auto x = index.find('x');
        if (x == std::string_view::npos) throw InvalidArgument("2D mode index must read <k>x<l>");
        m.k = detail::parse_int(index.substr(0, x), "mode index");
        m.l = detail::parse_int(index.substr(x + 1), "mode index");
      } else {
        m.k = detail::parse_int(index, "mode index");
      }
      if (m.k < 1 || (dim == 2 && m.l < 1)) throw InvalidArgument("mode indices start at 1");
      modes.push_back(m);
    }
    if (modes.empty()) throw InvalidArgument("modes: needs at least one entry");
    return make_sine_initial(std::string(id), dim, std::move(modes));
  }
  throw InvalidArgument("unknown initial data id '" + std::string(id) + "' (expected smooth, nonsmooth, zero or modes:...)");
}

/// Source term f(x, t) by id; "none" yields an empty optional.
inline std::optional<std::function<double(Point, double)>> make_source(std::string_view id) {
  if (id == "none" || id.empty()) return std::nullopt;
  if (id.starts_with("const:")) {
    const double c = detail::parse_double(id.substr(6), "source value");
    return [c](Point, double) { return c; };
  }
  throw InvalidArgument("unknown source id '" + std::string(id) + "' (expected none or const:<c>)");
}

}  // namespace subdiff
