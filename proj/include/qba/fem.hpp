#ifndef QBA_FEM_HPP
#define QBA_FEM_HPP

#include <array>
#include <functional>
#include <vector>

#include "qba/csr.hpp"
#include "qba/mesh.hpp"

namespace qba {

/// Evaluation rule for data and exact solutions on [0,1]^2. gradient and
/// laplacian may be empty when a use site only needs point values.
struct ScalarField {
  std::function<double(double, double)> value;
  std::function<Vec2(double, double)> gradient;
  std::function<double(double, double)> laplacian;
};

ScalarField zero_field();
ScalarField constant_field(double c);
// sin(pi x) sin(pi y) with analytic gradient and laplacian
ScalarField sin_pi_sin_pi_field(double scale = 1.0);

/// Symmetric quadrature rule on the reference triangle, in barycentric
/// coordinates, weights summing to 1. Supported degrees of exactness:
/// 2 (3 pts), 4 (6 pts), 7 (13 pts).
struct QuadRule {
  struct Point {
    std::array<double, 3> lambda;
    double weight;
  };
  std::vector<Point> points;
};
const QuadRule& triangle_rule(int order);

// Sentinel magnitude encoding an unbounded side of a control box.
inline constexpr double kUnboundedBox = 1e308;
inline bool box_side_unbounded(double bound) { return std::abs(bound) >= 1e307; }

// --- P1 assembly on the given dof map (exact per-element integration). ---

CsrMatrix assemble_stiffness(const TriMesh& mesh, const DofMap& dofs);
CsrMatrix assemble_mass(const TriMesh& mesh, const DofMap& dofs);
std::vector<double> assemble_load(const TriMesh& mesh, const DofMap& dofs,
                                  const ScalarField& f, int quad_order);

// Gram of the L2-orthogonal projection onto piecewise constants:
// x^T G y = sum_T |T| mean_T(x) mean_T(y).
CsrMatrix p0_gram(const TriMesh& mesh, const DofMap& dofs);

// N(z)_i = int clamp(-z_h/sqrt(alpha), q_lo, q_hi) phi_i, integrated exactly
// by subdividing each triangle along the clamp level sets. With
// quadrature_fallback the piecewise-smooth integrand is instead sampled with
// the degree-7 rule on the same subdivision (cross-check path).
std::vector<double> assemble_clamped_term(const TriMesh& mesh, const DofMap& dofs,
                                          const std::vector<double>& z, double alpha,
                                          double q_lo, double q_hi,
                                          bool quadrature_fallback = false);

// Mass matrix restricted to the clamp-inactive region
// {q_lo < -z_h/sqrt(alpha) < q_hi}; the semismooth-Newton derivative of the
// clamped term is -sqrt(alpha)^{-1}... assembled exactly on the subdivision.
CsrMatrix assemble_inactive_mass(const TriMesh& mesh, const DofMap& dofs,
                                 const std::vector<double>& z, double alpha,
                                 double q_lo, double q_hi);

// || clamp(-z1_h/sa) - clamp(-z2_h/sa) ||_{L2}^2, exact.
double clamped_difference_l2sq(const TriMesh& mesh, const DofMap& dofs,
                               const std::vector<double>& z1,
                               const std::vector<double>& z2, double alpha,
                               double q_lo, double q_hi);

// --- helpers shared with the analysis module ---

// Nodal values of a dof vector on a triangle (boundary vertices read 0).
std::array<double, 3> nodal_on_triangle(const TriMesh& mesh, const DofMap& dofs,
                                        const std::vector<double>& x, std::size_t t);

// Per-triangle means of the P1 function with coefficients x.
std::vector<double> element_means(const TriMesh& mesh, const DofMap& dofs,
                                  const std::vector<double>& x);

// Convex polygon in barycentric coordinates of a host triangle.
using BaryPolygon = std::vector<std::array<double, 3>>;

// Part of {poly} where the affine function with nodal values g satisfies
// g >= c (keep_ge) or g <= c.
BaryPolygon clip_polygon(const BaryPolygon& poly, const std::array<double, 3>& g,
                         double c, bool keep_ge);

// Exact integrals over a barycentric polygon inside a triangle of area.
double integrate_affine(double tri_area, const BaryPolygon& poly,
                        const std::array<double, 3>& a);
double integrate_product(double tri_area, const BaryPolygon& poly,
                         const std::array<double, 3>& a,
                         const std::array<double, 3>& b);

}  // namespace qba

#endif
