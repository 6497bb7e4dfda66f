#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "subdiff/forward_solver.hpp"
#include "subdiff/spectral_oracle.hpp"

using namespace subdiff;

TEST(SpectralOracle, InitialTimeReproducesData) {
  const auto sol = SpectralSolution::from_sines(1, 0.4, 1.0, {{1, 0, 1.0}, {3, 0, -0.5}});
  for (double x = 0.0; x <= 1.0; x += 0.1) {
    const double u0 = std::sin(std::numbers::pi * x) - 0.5 * std::sin(3 * std::numbers::pi * x);
    EXPECT_NEAR(sol.evaluate(Point{x, 0.5}, 0.0), u0, 1e-15);
  }
}

TEST(SpectralOracle, OrderOneIsHeatKernelMode) {
  const SpectralSolution sol(1, 1.0, 1.0, {{1, 0, 1.0}});
  for (double t : {0.01, 0.1, 0.5})
    for (double x : {0.2, 0.5, 0.9})
      EXPECT_NEAR(sol.evaluate(Point{x, 0.5}, t),
                  std::exp(-std::numbers::pi * std::numbers::pi * t) * std::sqrt(2.0) * std::sin(std::numbers::pi * x),
                  1e-14);
}

TEST(SpectralOracle, HalfOrderUsesErfcIdentity) {
  const auto sol = SpectralSolution::from_sines(1, 0.5, 1.0, {{1, 0, 1.0}});
  const double z = -std::numbers::pi * std::numbers::pi;
  const double e = std::exp(z * z) * std::erfc(-z);
  for (double x : {0.25, 0.5})
    EXPECT_NEAR(sol.evaluate(Point{x, 0.5}, 1.0), e * std::sin(std::numbers::pi * x), 1e-10);
}

TEST(SpectralOracle, EigenvaluesIncreaseAndModesDecay) {
  std::vector<SpectralMode> modes;
  for (int k = 1; k <= 6; ++k) modes.push_back({k, 0, 1.0});
  const SpectralSolution sol(1, 0.6, 2.0, modes);
  for (std::size_t i = 1; i < modes.size(); ++i) EXPECT_GT(sol.eigenvalue(modes[i]), sol.eigenvalue(modes[i - 1]));
  for (const auto& m : modes) {
    EXPECT_GT(sol.eigenvalue(m), 0.0);
    double prev = 1.0;
    for (double t = 0.05; t <= 2.0; t += 0.05) {
      const double d = sol.decay(m, t);
      EXPECT_LE(d, prev);
      EXPECT_GT(d, 0.0);
      prev = d;
    }
  }
}

TEST(SpectralOracle, TwoDimensionalTensorModes) {
  const auto sol = SpectralSolution::from_sines(2, 0.5, 1.5, {{2, 1, 1.0}});
  EXPECT_NEAR(sol.eigenvalue(sol.modes()[0]), 1.5 * 5.0 * std::numbers::pi * std::numbers::pi, 1e-12);
  const Point p{0.3, 0.6};
  EXPECT_NEAR(sol.evaluate(p, 0.0), std::sin(2 * std::numbers::pi * 0.3) * std::sin(std::numbers::pi * 0.6), 1e-15);
  const auto field = sol.at_time(0.7);
  EXPECT_DOUBLE_EQ(field(p), sol.evaluate(p, 0.7));
}

TEST(SpectralOracle, RejectsBadInput) {
  EXPECT_THROW(SpectralSolution(3, 0.5, 1.0, {}), InvalidArgument);
  EXPECT_THROW(SpectralSolution(1, 0.0, 1.0, {}), InvalidArgument);
  EXPECT_THROW(SpectralSolution(1, 0.5, -1.0, {}), InvalidArgument);
  EXPECT_THROW(SpectralSolution(2, 0.5, 1.0, {{1, 0, 1.0}}), InvalidArgument);
  const SpectralSolution ok(1, 0.5, 1.0, {{1, 0, 1.0}});
  EXPECT_THROW(ok.decay(ok.modes()[0], -1.0), InvalidArgument);
}

TEST(SpectralOracle, AgreesWithSolverInTwoDimensions) {
  auto s = build_space(2, 31);
  const auto sol = SpectralSolution::from_sines(2, 0.5, 1.0, {{1, 1, 1.0}});
  const ScalarField u0 = [](Point p) { return std::sin(std::numbers::pi * p.x) * std::sin(std::numbers::pi * p.y); };
  ForwardProblem p{s, CoefficientField::constant(1.0), 0.5, TimeGrid(0.5, 100), std::nullopt, l2_project(*s, u0)};
  const auto uT = solve_forward(p).states.back();
  const double err = l2_error(*s, uT, sol.at_time(0.5));
  const double ref = l2_norm(*s, uT);
  EXPECT_LT(err / ref, 0.02);
}
