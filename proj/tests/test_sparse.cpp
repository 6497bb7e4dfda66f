#include <gtest/gtest.h>

#include <vector>

#include "subdiff/sparse.hpp"

using namespace subdiff;

namespace {

// 1D Laplacian-like tridiagonal (4, -1) of size n.
CsrMatrix tridiagonal(std::size_t n, double diag, double off) {
  auto p = std::make_shared<CsrPattern>();
  p->n = n;
  p->row_ptr.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) p->col.push_back(i - 1);
    p->col.push_back(i);
    if (i + 1 < n) p->col.push_back(i + 1);
    p->row_ptr.push_back(p->col.size());
  }
  CsrMatrix m(p);
  auto v = m.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = p->row_ptr[i]; k < p->row_ptr[i + 1]; ++k) v[k] = p->col[k] == i ? diag : off;
  return m;
}

}  // namespace

TEST(Csr, FindAndEntryAccess) {
  const auto m = tridiagonal(5, 4.0, -1.0);
  EXPECT_EQ(m.pattern().find(0, 3), CsrPattern::npos);
  EXPECT_EQ(m(2, 2), 4.0);
  EXPECT_EQ(m(2, 3), -1.0);
  EXPECT_EQ(m(0, 4), 0.0);
  EXPECT_TRUE(m.is_symmetric());
}

TEST(Csr, MultiplyMatchesHandProduct) {
  const auto m = tridiagonal(3, 2.0, -1.0);
  const std::vector<double> x{1.0, 2.0, 3.0};
  const auto y = m * std::span<const double>(x);
  EXPECT_DOUBLE_EQ(y[0], 0.0);
  EXPECT_DOUBLE_EQ(y[1], 0.0);
  EXPECT_DOUBLE_EQ(y[2], 4.0);
}

TEST(Csr, AssignCombination) {
  const auto a = tridiagonal(4, 2.0, -1.0);
  const auto b = tridiagonal(4, 1.0, 0.5);
  CsrMatrix c(a.shared_pattern());
  c.assign_combination(3.0, a, -2.0, b);
  EXPECT_DOUBLE_EQ(c(1, 1), 4.0);
  EXPECT_DOUBLE_EQ(c(1, 2), -4.0);
}

TEST(ConjugateGradient, SolvesSpdSystem) {
  const auto m = tridiagonal(50, 4.0, -1.0);
  std::vector<double> x_true(50);
  for (std::size_t i = 0; i < 50; ++i) x_true[i] = std::sin(0.3 * static_cast<double>(i));
  const auto b = m * std::span<const double>(x_true);
  for (bool jacobi : {false, true}) {
    std::vector<double> x(50, 0.0);
    const auto rep = conjugate_gradient(m, b, x, 1e-13, 500, jacobi);
    ASSERT_TRUE(rep.converged);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(x[i], x_true[i], 1e-11);
  }
}

TEST(ConjugateGradient, ZeroRightHandSideGivesZero) {
  const auto m = tridiagonal(6, 4.0, -1.0);
  std::vector<double> b(6, 0.0), x(6, 7.0);
  const auto rep = conjugate_gradient(m, b, x, 1e-10, 10);
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.iterations, 0u);
  for (double v : x) EXPECT_EQ(v, 0.0);
}

TEST(ConjugateGradient, ReportsFailureWhenCapped) {
  const auto m = tridiagonal(100, 2.0, -1.0);
  std::vector<double> b(100, 1.0), x(100, 0.0);
  const auto rep = conjugate_gradient(m, b, x, 1e-14, 3);
  EXPECT_FALSE(rep.converged);
  EXPECT_EQ(rep.iterations, 3u);
}
