#pragma once

// Uniform P1 finite elements on (0,1) and (0,1)^2 with homogeneous Dirichlet
// boundary conditions. All operators and vectors live on interior nodes only.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/sparse.hpp"

namespace subdiff {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// 1D points are embedded on the midline y = 1/2 when a field is 2D-shaped.
inline constexpr double kLineEmbeddingY = 0.5;

using ScalarField = std::function<double(Point)>;

class UniformMesh {
 public:
  UniformMesh(int dim, std::size_t subdivisions) : dim_(dim), m_(subdivisions) {
    if (dim != 1 && dim != 2) throw InvalidArgument("mesh dimension must be 1 or 2");
    if (subdivisions == 0) throw InvalidArgument("mesh needs at least one interior node per axis (M >= 1)");
    h_ = 1.0 / static_cast<double>(m_ + 1);
    const std::size_t per_axis = m_ + 2;
    auto coord = [&](std::size_t i) { return i == m_ + 1 ? 1.0 : static_cast<double>(i) * h_; };
    if (dim_ == 1) {
      for (std::size_t i = 0; i < per_axis; ++i) nodes_.push_back({coord(i), kLineEmbeddingY});
      for (std::size_t i = 0; i + 1 < per_axis; ++i) elements_.push_back({i, i + 1, 0});
    } else {
      for (std::size_t j = 0; j < per_axis; ++j)
        for (std::size_t i = 0; i < per_axis; ++i) nodes_.push_back({coord(i), coord(j)});
      auto id = [&](std::size_t i, std::size_t j) { return i + j * per_axis; };
      // every cell is cut along its lower-left to upper-right diagonal
      for (std::size_t j = 0; j + 1 < per_axis; ++j)
        for (std::size_t i = 0; i + 1 < per_axis; ++i) {
          elements_.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
          elements_.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    dof_of_node_.assign(nodes_.size(), kNoDof);
    auto interior = [&](std::size_t i) { return i >= 1 && i <= m_; };
    if (dim_ == 1) {
      for (std::size_t i = 1; i <= m_; ++i) {
        dof_of_node_[i] = node_of_dof_.size();
        node_of_dof_.push_back(i);
      }
    } else {
      for (std::size_t j = 0; j < per_axis; ++j)
        for (std::size_t i = 0; i < per_axis; ++i)
          if (interior(i) && interior(j)) {
            dof_of_node_[i + j * per_axis] = node_of_dof_.size();
            node_of_dof_.push_back(i + j * per_axis);
          }
    }
  }

  int dim() const { return dim_; }
  std::size_t subdivisions() const { return m_; }
  double h() const { return h_; }
  std::size_t vertices_per_element() const { return static_cast<std::size_t>(dim_) + 1; }
  const std::vector<Point>& nodes() const { return nodes_; }
  const std::vector<std::array<std::size_t, 3>>& elements() const { return elements_; }
  std::size_t dof_of_node(std::size_t node) const { return dof_of_node_[node]; }
  std::size_t node_of_dof(std::size_t dof) const { return node_of_dof_[dof]; }
  std::size_t num_dofs() const { return node_of_dof_.size(); }

  double element_measure(std::size_t e) const {
    const auto& el = elements_[e];
    if (dim_ == 1) return nodes_[el[1]].x - nodes_[el[0]].x;
    const Point& p0 = nodes_[el[0]];
    const Point& p1 = nodes_[el[1]];
    const Point& p2 = nodes_[el[2]];
    return 0.5 * std::abs((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
  }

  static constexpr std::size_t kNoDof = static_cast<std::size_t>(-1);

 private:
  int dim_;
  std::size_t m_;
  double h_ = 0.0;
  std::vector<Point> nodes_;
  std::vector<std::array<std::size_t, 3>> elements_;
  std::vector<std::size_t> dof_of_node_;
  std::vector<std::size_t> node_of_dof_;
};

/// Identity of a FemSpace for compatibility checks between vectors.
struct SpaceKey {
  int dim = 0;
  std::size_t subdivisions = 0;
  bool operator==(const SpaceKey&) const = default;
};

struct NodalVector {
  SpaceKey space;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

inline void require_same_space(const SpaceKey& a, const SpaceKey& b, const char* what) {
  if (!(a == b)) {
    std::ostringstream os;
    os << what << ": space mismatch (dim " << a.dim << ", M " << a.subdivisions << " vs dim " << b.dim
       << ", M " << b.subdivisions << ")";
    throw InvalidArgument(os.str());
  }
}

/// Quadrature on one element: hat-function values at each point plus weights.
struct ElementQuadrature {
  std::vector<std::array<double, 3>> shape;  // barycentric values per point
  std::vector<double> reference_weights;     // fractions of the element measure
};

inline ElementQuadrature element_quadrature(int dim) {
  if (dim == 1) {
    const double g = 0.5 / std::sqrt(3.0);
    return {{{0.5 + g, 0.5 - g, 0.0}, {0.5 - g, 0.5 + g, 0.0}}, {0.5, 0.5}};
  }
  // edge midpoints; exact for quadratics
  return {{{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
}

/// Higher-order rule for measuring errors: 5-point Gauss in 1D, 7-point
/// degree-5 rule on triangles. The assembly rule above would make P1 projection
/// errors look superconvergent in 1D, since the projection residual is nearly
/// the degree-2 Legendre polynomial, which vanishes at the 2-point Gauss nodes.
inline ElementQuadrature error_quadrature(int dim) {
  ElementQuadrature q;
  if (dim == 1) {
    const double s = std::sqrt(10.0 / 7.0);
    const std::array<double, 5> x{0.0, -std::sqrt(5.0 - 2.0 * s) / 3.0, std::sqrt(5.0 - 2.0 * s) / 3.0,
                                  -std::sqrt(5.0 + 2.0 * s) / 3.0, std::sqrt(5.0 + 2.0 * s) / 3.0};
    const double w0 = 128.0 / 225.0, w1 = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0,
                 w2 = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
    const std::array<double, 5> w{w0, w1, w1, w2, w2};
    for (std::size_t i = 0; i < 5; ++i) {
      const double t = 0.5 * (1.0 + x[i]);
      q.shape.push_back({1.0 - t, t, 0.0});
      q.reference_weights.push_back(0.5 * w[i]);
    }
    return q;
  }
  const double r = std::sqrt(15.0);
  const double a1 = (6.0 - r) / 21.0, b1 = (9.0 + 2.0 * r) / 21.0;
  const double a2 = (6.0 + r) / 21.0, b2 = (9.0 - 2.0 * r) / 21.0;
  const double w1 = (155.0 - r) / 1200.0, w2 = (155.0 + r) / 1200.0;
  q.shape = {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {b1, a1, a1}, {a1, b1, a1}, {a1, a1, b1},
             {b2, a2, a2}, {a2, b2, a2}, {a2, a2, b2}};
  q.reference_weights = {9.0 / 40.0, w1, w1, w1, w2, w2, w2};
  return q;
}

struct SymMatrix2 {
  double a11 = 0.0;
  double a12 = 0.0;
  double a22 = 0.0;

  std::pair<double, double> eigenvalues() const {
    const double mean = 0.5 * (a11 + a22);
    const double rad = std::hypot(0.5 * (a11 - a22), a12);
    return {mean - rad, mean + rad};
  }
};

/// Symmetric matrix-valued diffusion coefficient a(x, t) with declared
/// ellipticity bounds. In 1D only a11 enters the operator.
class CoefficientField {
 public:
  using Fn = std::function<SymMatrix2(Point, double)>;

  CoefficientField(std::string name, Fn fn, double lower, double upper)
      : name_(std::move(name)), fn_(std::move(fn)), lower_(lower), upper_(upper) {
    if (!(lower > 0.0) || !(upper >= lower)) throw InvalidArgument("ellipticity bounds must satisfy 0 < lower <= upper");
  }

  static CoefficientField constant(double c) {
    if (!(c > 0.0)) throw InvalidArgument("constant diffusivity must be positive");
    std::ostringstream os;
    os << "const:" << c;
    return CoefficientField(os.str(), [c](Point, double) { return SymMatrix2{c, 0.0, c}; }, c, c);
  }

  const std::string& name() const { return name_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  SymMatrix2 operator()(Point p, double t) const { return fn_(p, t); }

  /// Evaluates and checks the ellipticity bounds, throwing CoefficientInvalid.
  SymMatrix2 checked(Point p, double t, int dim) const {
    const SymMatrix2 a = fn_(p, t);
    double lo = a.a11;
    double hi = a.a11;
    if (dim == 2) std::tie(lo, hi) = a.eigenvalues();
    const double slack = 1e-12 * upper_;
    if (!(lo >= lower_ - slack) || !(hi <= upper_ + slack)) {
      std::ostringstream os;
      os.precision(17);
      os << "coefficient '" << name_ << "' leaves [" << lower_ << ", " << upper_ << "] at (x=" << p.x;
      if (dim == 2) os << ", y=" << p.y;
      os << ", t=" << t << "): eigenvalues " << lo << ", " << hi;
      throw CoefficientInvalid(os.str());
    }
    return a;
  }

 private:
  std::string name_;
  Fn fn_;
  double lower_;
  double upper_;
};

class FemSpace;
inline CsrMatrix assemble_mass(const FemSpace& space);

/// P1 space on the interior nodes of a uniform mesh, with element geometry,
/// quadrature tables and the scatter map into the shared sparsity pattern.
class FemSpace {
 public:
  FemSpace(int dim, std::size_t subdivisions) : mesh_(dim, subdivisions), quad_(element_quadrature(dim)) {
    const auto& els = mesh_.elements();
    const std::size_t nv = mesh_.vertices_per_element();
    const auto& nodes = mesh_.nodes();
    grads_.resize(els.size());
    measure_.resize(els.size());
    qpoints_.resize(els.size());
    for (std::size_t e = 0; e < els.size(); ++e) {
      const auto& el = els[e];
      measure_[e] = mesh_.element_measure(e);
      if (dim == 1) {
        const double len = measure_[e];
        grads_[e] = {Point{-1.0 / len, 0.0}, Point{1.0 / len, 0.0}, Point{}};
      } else {
        const Point& p0 = nodes[el[0]];
        const Point& p1 = nodes[el[1]];
        const Point& p2 = nodes[el[2]];
        const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
        grads_[e] = {Point{(p1.y - p2.y) / det, (p2.x - p1.x) / det},
                     Point{(p2.y - p0.y) / det, (p0.x - p2.x) / det},
                     Point{(p0.y - p1.y) / det, (p1.x - p0.x) / det}};
      }
      for (const auto& s : quad_.shape) {
        Point q;
        for (std::size_t a = 0; a < nv; ++a) {
          q.x += s[a] * nodes[el[a]].x;
          q.y += s[a] * nodes[el[a]].y;
        }
        qpoints_[e].push_back(q);
      }
    }
    build_pattern();
    mass_ = assemble_mass(*this);
  }

  const UniformMesh& mesh() const { return mesh_; }
  int dim() const { return mesh_.dim(); }
  double h() const { return mesh_.h(); }
  std::size_t num_dofs() const { return mesh_.num_dofs(); }
  SpaceKey key() const { return {mesh_.dim(), mesh_.subdivisions()}; }
  const ElementQuadrature& quadrature() const { return quad_; }
  const std::vector<Point>& quadrature_points(std::size_t e) const { return qpoints_[e]; }
  double quadrature_weight(std::size_t e, std::size_t q) const { return quad_.reference_weights[q] * measure_[e]; }
  double element_measure(std::size_t e) const { return measure_[e]; }
  const std::array<Point, 3>& gradients(std::size_t e) const { return grads_[e]; }
  const std::shared_ptr<const CsrPattern>& pattern() const { return pattern_; }
  /// CSR slot of local pair (a, b) of element e, or npos if either is a boundary node.
  std::size_t slot(std::size_t e, std::size_t a, std::size_t b) const { return slots_[e][3 * a + b]; }
  /// Interior dof of local vertex a of element e, or kNoDof.
  std::size_t local_dof(std::size_t e, std::size_t a) const {
    return mesh_.dof_of_node(mesh_.elements()[e][a]);
  }
  const CsrMatrix& mass() const { return mass_; }

  NodalVector zeros() const { return {key(), std::vector<double>(num_dofs(), 0.0)}; }
  NodalVector make_vector(std::vector<double> values) const {
    if (values.size() != num_dofs()) throw InvalidArgument("nodal vector length does not match the space");
    return {key(), std::move(values)};
  }

 private:
  void build_pattern() {
    const std::size_t n = num_dofs();
    const std::size_t nv = mesh_.vertices_per_element();
    std::vector<std::set<std::size_t>> rows(n);
    for (std::size_t e = 0; e < mesh_.elements().size(); ++e)
      for (std::size_t a = 0; a < nv; ++a)
        for (std::size_t b = 0; b < nv; ++b) {
          const auto i = local_dof(e, a);
          const auto j = local_dof(e, b);
          if (i != UniformMesh::kNoDof && j != UniformMesh::kNoDof) rows[i].insert(j);
        }
    auto p = std::make_shared<CsrPattern>();
    p->n = n;
    p->row_ptr.push_back(0);
    for (const auto& r : rows) {
      p->col.insert(p->col.end(), r.begin(), r.end());
      p->row_ptr.push_back(p->col.size());
    }
    slots_.assign(mesh_.elements().size(), {});
    for (std::size_t e = 0; e < mesh_.elements().size(); ++e) {
      slots_[e].fill(CsrPattern::npos);
      for (std::size_t a = 0; a < nv; ++a)
        for (std::size_t b = 0; b < nv; ++b) {
          const auto i = local_dof(e, a);
          const auto j = local_dof(e, b);
          if (i != UniformMesh::kNoDof && j != UniformMesh::kNoDof) slots_[e][3 * a + b] = p->find(i, j);
        }
    }
    pattern_ = std::move(p);
  }

  UniformMesh mesh_;
  ElementQuadrature quad_;
  std::vector<std::array<Point, 3>> grads_;
  std::vector<double> measure_;
  std::vector<std::vector<Point>> qpoints_;
  std::shared_ptr<const CsrPattern> pattern_;
  std::vector<std::array<std::size_t, 9>> slots_;
  CsrMatrix mass_;
};

inline std::shared_ptr<const FemSpace> build_space(int dim, std::size_t subdivisions) {
  return std::make_shared<const FemSpace>(dim, subdivisions);
}

/// Exact P1 mass matrix from analytic element integrals.
inline CsrMatrix assemble_mass(const FemSpace& space) {
  CsrMatrix m(space.pattern());
  auto vals = m.values();
  const std::size_t nv = space.mesh().vertices_per_element();
  // local mass: measure/6 * [2 1; 1 2] in 1D, measure/12 * (1 + delta_ab) in 2D
  const double denom = space.dim() == 1 ? 6.0 : 12.0;
  for (std::size_t e = 0; e < space.mesh().elements().size(); ++e) {
    const double scale = space.element_measure(e) / denom;
    for (std::size_t a = 0; a < nv; ++a)
      for (std::size_t b = 0; b < nv; ++b) {
        const auto k = space.slot(e, a, b);
        if (k != CsrPattern::npos) vals[k] += scale * (a == b ? 2.0 : 1.0);
      }
  }
  return m;
}

/// Recomputes stiffness values at time t in place, reusing the pattern of `out`.
inline void assemble_stiffness_into(const FemSpace& space, const CoefficientField& coeff, double t, CsrMatrix& out) {
  auto vals = out.values();
  std::fill(vals.begin(), vals.end(), 0.0);
  const std::size_t nv = space.mesh().vertices_per_element();
  const int dim = space.dim();
  const std::size_t nq = space.quadrature().reference_weights.size();
  for (std::size_t e = 0; e < space.mesh().elements().size(); ++e) {
    const auto& g = space.gradients(e);
    // integrate the coefficient over the element; gradients are constant
    SymMatrix2 abar;
    for (std::size_t q = 0; q < nq; ++q) {
      const SymMatrix2 a = coeff.checked(space.quadrature_points(e)[q], t, dim);
      const double w = space.quadrature_weight(e, q);
      abar.a11 += w * a.a11;
      abar.a12 += w * a.a12;
      abar.a22 += w * a.a22;
    }
    for (std::size_t a = 0; a < nv; ++a)
      for (std::size_t b = 0; b < nv; ++b) {
        const auto k = space.slot(e, a, b);
        if (k == CsrPattern::npos) continue;
        double v = abar.a11 * g[b].x * g[a].x;
        if (dim == 2) v += abar.a12 * (g[b].y * g[a].x + g[b].x * g[a].y) + abar.a22 * g[b].y * g[a].y;
        vals[k] += v;
      }
  }
}

inline CsrMatrix assemble_stiffness(const FemSpace& space, const CoefficientField& coeff, double t) {
  CsrMatrix s(space.pattern());
  assemble_stiffness_into(space, coeff, t, s);
  return s;
}

/// b_i = integral of f * phi_i by element quadrature.
inline std::vector<double> load_vector(const FemSpace& space, const ScalarField& f) {
  std::vector<double> b(space.num_dofs(), 0.0);
  const auto& quad = space.quadrature();
  const std::size_t nv = space.mesh().vertices_per_element();
  for (std::size_t e = 0; e < space.mesh().elements().size(); ++e) {
    for (std::size_t q = 0; q < quad.reference_weights.size(); ++q) {
      const double wf = space.quadrature_weight(e, q) * f(space.quadrature_points(e)[q]);
      for (std::size_t a = 0; a < nv; ++a) {
        const auto i = space.local_dof(e, a);
        if (i != UniformMesh::kNoDof) b[i] += wf * quad.shape[q][a];
      }
    }
  }
  return b;
}

/// L2 projection onto the interior P1 space.
inline NodalVector l2_project(const FemSpace& space, const ScalarField& f) {
  const auto b = load_vector(space, f);
  NodalVector v = space.zeros();
  const auto rep = conjugate_gradient(space.mass(), b, v.values, 1e-12, 10 * space.num_dofs() + 100);
  if (!rep.converged) throw NumericFailure("mass-matrix solve did not converge in l2_project");
  return v;
}

/// Nodal interpolant at interior nodes (boundary values are dropped).
inline NodalVector interpolate(const FemSpace& space, const ScalarField& f) {
  NodalVector v = space.zeros();
  for (std::size_t i = 0; i < v.size(); ++i) v.values[i] = f(space.mesh().nodes()[space.mesh().node_of_dof(i)]);
  return v;
}

inline double l2_norm(const FemSpace& space, const NodalVector& v) {
  require_same_space(space.key(), v.space, "l2_norm");
  const auto mv = space.mass() * std::span<const double>(v.values);
  return std::sqrt(std::max(0.0, dot(v.values, mv)));
}

/// Quadrature L2 norm of (v_h - exact) over the domain.
inline double l2_error(const FemSpace& space, const NodalVector& v, const ScalarField& exact) {
  require_same_space(space.key(), v.space, "l2_error");
  static const ElementQuadrature quad1 = error_quadrature(1), quad2 = error_quadrature(2);
  const auto& quad = space.dim() == 1 ? quad1 : quad2;
  const auto& mesh = space.mesh();
  const std::size_t nv = mesh.vertices_per_element();
  double sum = 0.0;
  for (std::size_t e = 0; e < mesh.elements().size(); ++e) {
    const auto& el = mesh.elements()[e];
    for (std::size_t q = 0; q < quad.reference_weights.size(); ++q) {
      double vh = 0.0;
      Point x;
      for (std::size_t a = 0; a < nv; ++a) {
        const double phi = quad.shape[q][a];
        const auto i = space.local_dof(e, a);
        if (i != UniformMesh::kNoDof) vh += phi * v.values[i];
        x.x += phi * mesh.nodes()[el[a]].x;
        x.y += phi * mesh.nodes()[el[a]].y;
      }
      const double d = vh - exact(x);
      sum += quad.reference_weights[q] * space.element_measure(e) * d * d;
    }
  }
  return std::sqrt(sum);
}

/// Value of the P1 function at an arbitrary point of the closed domain.
inline double evaluate(const FemSpace& space, const NodalVector& v, Point p) {
  require_same_space(space.key(), v.space, "evaluate");
  const auto& mesh = space.mesh();
  const std::size_t m = mesh.subdivisions();
  const std::size_t per_axis = m + 2;
  const double n_cells = static_cast<double>(m + 1);
  auto locate = [&](double s, std::size_t& cell, double& local) {
    const double scaled = s * n_cells;
    double c = std::floor(scaled);
    if (c < 0.0) c = 0.0;
    if (c > n_cells - 1.0) c = n_cells - 1.0;
    cell = static_cast<std::size_t>(c);
    local = scaled - c;
  };
  auto value_at = [&](std::size_t node) {
    const auto d = mesh.dof_of_node(node);
    return d == UniformMesh::kNoDof ? 0.0 : v.values[d];
  };
  std::size_t i = 0;
  double sx = 0.0;
  locate(p.x, i, sx);
  if (space.dim() == 1) return (1.0 - sx) * value_at(i) + sx * value_at(i + 1);
  std::size_t j = 0;
  double sy = 0.0;
  locate(p.y, j, sy);
  auto id = [&](std::size_t a, std::size_t b) { return a + b * per_axis; };
  const double v00 = value_at(id(i, j));
  const double v11 = value_at(id(i + 1, j + 1));
  if (sy <= sx) return (1.0 - sx) * v00 + (sx - sy) * value_at(id(i + 1, j)) + sy * v11;
  return (1.0 - sy) * v00 + (sy - sx) * value_at(id(i, j + 1)) + sx * v11;
}

/// Evaluates a P1 function from one space at the interior nodes of another.
inline NodalVector transfer(const FemSpace& from, const NodalVector& v, const FemSpace& to) {
  NodalVector out = to.zeros();
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values[i] = evaluate(from, v, to.mesh().nodes()[to.mesh().node_of_dof(i)]);
  return out;
}

}  // namespace subdiff
