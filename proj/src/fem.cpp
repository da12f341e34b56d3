#include "qba/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qba {

namespace {

constexpr double kPi = std::numbers::pi;

struct ElementGeometry {
  std::array<std::int32_t, 3> v;
  double area;
  std::array<Vec2, 3> grad;  // gradients of the barycentric basis
};

ElementGeometry element_geometry(const TriMesh& mesh, std::size_t t) {
  ElementGeometry g;
  g.v = mesh.triangles[t];
  const Vec2& p0 = mesh.vertices[g.v[0]];
  const Vec2& p1 = mesh.vertices[g.v[1]];
  const Vec2& p2 = mesh.vertices[g.v[2]];
  g.area = 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
  if (g.area <= 0.0) throw std::logic_error("fem: nonpositive triangle area");
  double inv2a = 1.0 / (2.0 * g.area);
  g.grad[0] = {(p1.y - p2.y) * inv2a, (p2.x - p1.x) * inv2a};
  g.grad[1] = {(p2.y - p0.y) * inv2a, (p0.x - p2.x) * inv2a};
  g.grad[2] = {(p0.y - p1.y) * inv2a, (p1.x - p0.x) * inv2a};
  return g;
}

void require_dofs(const DofMap& dofs, const char* op) {
  if (dofs.n_dof < 1)
    throw std::invalid_argument(std::string(op) + ": mesh has no degrees of freedom");
}

Vec2 physical_point(const TriMesh& mesh, const std::array<std::int32_t, 3>& v,
                    const std::array<double, 3>& lambda) {
  const Vec2& p0 = mesh.vertices[v[0]];
  const Vec2& p1 = mesh.vertices[v[1]];
  const Vec2& p2 = mesh.vertices[v[2]];
  return {lambda[0] * p0.x + lambda[1] * p1.x + lambda[2] * p2.x,
          lambda[0] * p0.y + lambda[1] * p1.y + lambda[2] * p2.y};
}

}  // namespace

ScalarField zero_field() {
  return {[](double, double) { return 0.0; },
          [](double, double) { return Vec2{0.0, 0.0}; },
          [](double, double) { return 0.0; }};
}

ScalarField constant_field(double c) {
  return {[c](double, double) { return c; },
          [](double, double) { return Vec2{0.0, 0.0}; },
          [](double, double) { return 0.0; }};
}

ScalarField sin_pi_sin_pi_field(double scale) {
  return {[scale](double x, double y) {
            return scale * std::sin(kPi * x) * std::sin(kPi * y);
          },
          [scale](double x, double y) {
            return Vec2{scale * kPi * std::cos(kPi * x) * std::sin(kPi * y),
                        scale * kPi * std::sin(kPi * x) * std::cos(kPi * y)};
          },
          [scale](double x, double y) {
            return -2.0 * kPi * kPi * scale * std::sin(kPi * x) * std::sin(kPi * y);
          }};
}

const QuadRule& triangle_rule(int order) {
  static const QuadRule rule2 = [] {
    QuadRule r;
    r.points = {{{0.5, 0.5, 0.0}, 1.0 / 3.0},
                {{0.0, 0.5, 0.5}, 1.0 / 3.0},
                {{0.5, 0.0, 0.5}, 1.0 / 3.0}};
    return r;
  }();
  static const QuadRule rule4 = [] {
    QuadRule r;
    const double a1 = 0.816847572980459, b1 = 0.091576213509771, w1 = 0.109951743655322;
    const double a2 = 0.108103018168070, b2 = 0.445948490915965, w2 = 0.223381589678011;
    r.points = {{{a1, b1, b1}, w1}, {{b1, a1, b1}, w1}, {{b1, b1, a1}, w1},
                {{a2, b2, b2}, w2}, {{b2, a2, b2}, w2}, {{b2, b2, a2}, w2}};
    return r;
  }();
  static const QuadRule rule7 = [] {
    QuadRule r;
    const double w0 = -0.149570044467670;
    const double a1 = 0.479308067841923, b1 = 0.260345966079038, w1 = 0.175615257433204;
    const double a2 = 0.869739794195568, b2 = 0.065130102902216, w2 = 0.053347235608839;
    const double a3 = 0.638444188569809, b3 = 0.312865496004875, c3 = 0.048690315425316,
                 w3 = 0.077113760890257;
    r.points = {{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, w0},
                {{a1, b1, b1}, w1}, {{b1, a1, b1}, w1}, {{b1, b1, a1}, w1},
                {{a2, b2, b2}, w2}, {{b2, a2, b2}, w2}, {{b2, b2, a2}, w2},
                {{a3, b3, c3}, w3}, {{a3, c3, b3}, w3}, {{b3, a3, c3}, w3},
                {{b3, c3, a3}, w3}, {{c3, a3, b3}, w3}, {{c3, b3, a3}, w3}};
    return r;
  }();
  switch (order) {
    case 2: return rule2;
    case 4: return rule4;
    case 7: return rule7;
    default:
      throw std::invalid_argument("triangle_rule: supported orders are 2, 4, 7");
  }
}

CsrMatrix assemble_stiffness(const TriMesh& mesh, const DofMap& dofs) {
  require_dofs(dofs, "assemble_stiffness");
  CsrBuilder builder(dofs.n_dof, dofs.n_dof);
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    for (int a = 0; a < 3; ++a) {
      std::int32_t i = dofs.vertex_to_dof[g.v[a]];
      if (i < 0) continue;
      for (int b = 0; b < 3; ++b) {
        std::int32_t j = dofs.vertex_to_dof[g.v[b]];
        if (j < 0) continue;
        builder.add(i, j,
                    g.area * (g.grad[a].x * g.grad[b].x + g.grad[a].y * g.grad[b].y));
      }
    }
  }
  return builder.build();
}

CsrMatrix assemble_mass(const TriMesh& mesh, const DofMap& dofs) {
  require_dofs(dofs, "assemble_mass");
  CsrBuilder builder(dofs.n_dof, dofs.n_dof);
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    const double d = g.area / 6.0, o = g.area / 12.0;
    for (int a = 0; a < 3; ++a) {
      std::int32_t i = dofs.vertex_to_dof[g.v[a]];
      if (i < 0) continue;
      for (int b = 0; b < 3; ++b) {
        std::int32_t j = dofs.vertex_to_dof[g.v[b]];
        if (j < 0) continue;
        builder.add(i, j, a == b ? d : o);
      }
    }
  }
  return builder.build();
}

std::vector<double> assemble_load(const TriMesh& mesh, const DofMap& dofs,
                                  const ScalarField& f, int quad_order) {
  require_dofs(dofs, "assemble_load");
  const QuadRule& rule = triangle_rule(quad_order);
  std::vector<double> F(static_cast<std::size_t>(dofs.n_dof), 0.0);
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    for (const auto& qp : rule.points) {
      Vec2 p = physical_point(mesh, g.v, qp.lambda);
      double fw = g.area * qp.weight * f.value(p.x, p.y);
      for (int a = 0; a < 3; ++a) {
        std::int32_t i = dofs.vertex_to_dof[g.v[a]];
        if (i >= 0) F[i] += fw * qp.lambda[a];
      }
    }
  }
  return F;
}

CsrMatrix p0_gram(const TriMesh& mesh, const DofMap& dofs) {
  require_dofs(dofs, "p0_gram");
  CsrBuilder builder(dofs.n_dof, dofs.n_dof);
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    const double w = g.area / 9.0;
    for (int a = 0; a < 3; ++a) {
      std::int32_t i = dofs.vertex_to_dof[g.v[a]];
      if (i < 0) continue;
      for (int b = 0; b < 3; ++b) {
        std::int32_t j = dofs.vertex_to_dof[g.v[b]];
        if (j >= 0) builder.add(i, j, w);
      }
    }
  }
  return builder.build();
}

std::array<double, 3> nodal_on_triangle(const TriMesh& mesh, const DofMap& dofs,
                                        const std::vector<double>& x, std::size_t t) {
  std::array<double, 3> vals{};
  const auto& tri = mesh.triangles[t];
  for (int a = 0; a < 3; ++a) {
    std::int32_t d = dofs.vertex_to_dof[tri[a]];
    vals[a] = d >= 0 ? x[d] : 0.0;
  }
  return vals;
}

std::vector<double> element_means(const TriMesh& mesh, const DofMap& dofs,
                                  const std::vector<double>& x) {
  std::vector<double> means(mesh.n_triangles());
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    auto v = nodal_on_triangle(mesh, dofs, x, t);
    means[t] = (v[0] + v[1] + v[2]) / 3.0;
  }
  return means;
}

BaryPolygon clip_polygon(const BaryPolygon& poly, const std::array<double, 3>& g,
                         double c, bool keep_ge) {
  BaryPolygon out;
  const std::size_t n = poly.size();
  if (n == 0) return out;
  auto value = [&](const std::array<double, 3>& lam) {
    return g[0] * lam[0] + g[1] * lam[1] + g[2] * lam[2];
  };
  auto inside = [&](double v) { return keep_ge ? v >= c : v <= c; };
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % n];
    double va = value(a), vb = value(b);
    bool ia = inside(va), ib = inside(vb);
    if (ia) out.push_back(a);
    if (ia != ib) {
      double t = (c - va) / (vb - va);
      out.push_back({a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]),
                     a[2] + t * (b[2] - a[2])});
    }
  }
  return out;
}

namespace {

double bary_subtri_area(double tri_area, const std::array<double, 3>& a,
                        const std::array<double, 3>& b,
                        const std::array<double, 3>& c) {
  // The (lambda1, lambda2) chart maps to the physical triangle with
  // Jacobian determinant 2*tri_area.
  double cross = (b[1] - a[1]) * (c[2] - a[2]) - (c[1] - a[1]) * (b[2] - a[2]);
  return tri_area * cross;  // signed; fans of convex polygons keep it positive
}

template <typename PerSubTri>
void for_each_fan_triangle(const BaryPolygon& poly, PerSubTri&& fn) {
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) fn(poly[0], poly[i], poly[i + 1]);
}

double affine_at(const std::array<double, 3>& a, const std::array<double, 3>& lam) {
  return a[0] * lam[0] + a[1] * lam[1] + a[2] * lam[2];
}

}  // namespace

double integrate_affine(double tri_area, const BaryPolygon& poly,
                        const std::array<double, 3>& a) {
  double sum = 0.0;
  for_each_fan_triangle(poly, [&](const auto& p, const auto& q, const auto& r) {
    double A = bary_subtri_area(tri_area, p, q, r);
    sum += A * (affine_at(a, p) + affine_at(a, q) + affine_at(a, r)) / 3.0;
  });
  return sum;
}

double integrate_product(double tri_area, const BaryPolygon& poly,
                         const std::array<double, 3>& a,
                         const std::array<double, 3>& b) {
  double sum = 0.0;
  for_each_fan_triangle(poly, [&](const auto& p, const auto& q, const auto& r) {
    double A = bary_subtri_area(tri_area, p, q, r);
    double a0 = affine_at(a, p), a1 = affine_at(a, q), a2 = affine_at(a, r);
    double b0 = affine_at(b, p), b1 = affine_at(b, q), b2 = affine_at(b, r);
    sum += A / 12.0 * (a0 * b0 + a1 * b1 + a2 * b2 + (a0 + a1 + a2) * (b0 + b1 + b2));
  });
  return sum;
}

namespace {

struct ClampRegions {
  BaryPolygon lo, mid, hi;  // w <= q_lo, q_lo <= w <= q_hi, w >= q_hi
};

ClampRegions clamp_regions(const std::array<double, 3>& w, double q_lo, double q_hi) {
  static const BaryPolygon whole = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  ClampRegions r;
  const bool lo_bounded = !box_side_unbounded(q_lo);
  const bool hi_bounded = !box_side_unbounded(q_hi);
  r.mid = whole;
  if (lo_bounded) {
    r.lo = clip_polygon(whole, w, q_lo, /*keep_ge=*/false);
    r.mid = clip_polygon(r.mid, w, q_lo, /*keep_ge=*/true);
  }
  if (hi_bounded) {
    r.hi = clip_polygon(whole, w, q_hi, /*keep_ge=*/true);
    r.mid = clip_polygon(r.mid, w, q_hi, /*keep_ge=*/false);
  }
  return r;
}

void check_box(double q_lo, double q_hi, double alpha, const char* op) {
  if (q_lo > q_hi)
    throw std::invalid_argument(std::string(op) + ": q_lo > q_hi");
  if (!(alpha > 0.0))
    throw std::invalid_argument(std::string(op) + ": alpha must be positive");
}

double clamp_value(double v, double q_lo, double q_hi) {
  return std::min(std::max(v, q_lo), q_hi);
}

}  // namespace

std::vector<double> assemble_clamped_term(const TriMesh& mesh, const DofMap& dofs,
                                          const std::vector<double>& z, double alpha,
                                          double q_lo, double q_hi,
                                          bool quadrature_fallback) {
  require_dofs(dofs, "assemble_clamped_term");
  check_box(q_lo, q_hi, alpha, "assemble_clamped_term");
  if (z.size() != static_cast<std::size_t>(dofs.n_dof))
    throw std::invalid_argument("assemble_clamped_term: z size mismatch");
  const double inv_sa = 1.0 / std::sqrt(alpha);

  std::vector<double> N(static_cast<std::size_t>(dofs.n_dof), 0.0);
  const QuadRule& rule7 = triangle_rule(7);

  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    auto zv = nodal_on_triangle(mesh, dofs, z, t);
    std::array<double, 3> w = {-zv[0] * inv_sa, -zv[1] * inv_sa, -zv[2] * inv_sa};
    ClampRegions regions = clamp_regions(w, q_lo, q_hi);

    for (int a = 0; a < 3; ++a) {
      std::int32_t i = dofs.vertex_to_dof[g.v[a]];
      if (i < 0) continue;
      std::array<double, 3> phi = {0, 0, 0};
      phi[a] = 1.0;
      double contrib = 0.0;
      if (!quadrature_fallback) {
        contrib += integrate_product(g.area, regions.mid, w, phi);
        if (!regions.lo.empty()) contrib += q_lo * integrate_affine(g.area, regions.lo, phi);
        if (!regions.hi.empty()) contrib += q_hi * integrate_affine(g.area, regions.hi, phi);
      } else {
        auto quad_region = [&](const BaryPolygon& poly) {
          for_each_fan_triangle(poly, [&](const auto& p, const auto& q, const auto& r) {
            double A = bary_subtri_area(g.area, p, q, r);
            for (const auto& qp : rule7.points) {
              std::array<double, 3> lam;
              for (int k = 0; k < 3; ++k)
                lam[k] = qp.lambda[0] * p[k] + qp.lambda[1] * q[k] + qp.lambda[2] * r[k];
              contrib += A * qp.weight *
                         clamp_value(affine_at(w, lam), q_lo, q_hi) * affine_at(phi, lam);
            }
          });
        };
        quad_region(regions.mid);
        quad_region(regions.lo);
        quad_region(regions.hi);
      }
      N[i] += contrib;
    }
  }
  return N;
}

CsrMatrix assemble_inactive_mass(const TriMesh& mesh, const DofMap& dofs,
                                 const std::vector<double>& z, double alpha,
                                 double q_lo, double q_hi) {
  require_dofs(dofs, "assemble_inactive_mass");
  check_box(q_lo, q_hi, alpha, "assemble_inactive_mass");
  const double inv_sa = 1.0 / std::sqrt(alpha);
  CsrBuilder builder(dofs.n_dof, dofs.n_dof);
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    auto zv = nodal_on_triangle(mesh, dofs, z, t);
    std::array<double, 3> w = {-zv[0] * inv_sa, -zv[1] * inv_sa, -zv[2] * inv_sa};
    ClampRegions regions = clamp_regions(w, q_lo, q_hi);
    if (regions.mid.size() < 3) continue;
    for (int a = 0; a < 3; ++a) {
      std::int32_t i = dofs.vertex_to_dof[g.v[a]];
      if (i < 0) continue;
      std::array<double, 3> phi_a = {0, 0, 0};
      phi_a[a] = 1.0;
      for (int b = 0; b < 3; ++b) {
        std::int32_t j = dofs.vertex_to_dof[g.v[b]];
        if (j < 0) continue;
        std::array<double, 3> phi_b = {0, 0, 0};
        phi_b[b] = 1.0;
        builder.add(i, j, integrate_product(g.area, regions.mid, phi_a, phi_b));
      }
    }
  }
  return builder.build();
}

double clamped_difference_l2sq(const TriMesh& mesh, const DofMap& dofs,
                               const std::vector<double>& z1,
                               const std::vector<double>& z2, double alpha,
                               double q_lo, double q_hi) {
  require_dofs(dofs, "clamped_difference_l2sq");
  check_box(q_lo, q_hi, alpha, "clamped_difference_l2sq");
  const double inv_sa = 1.0 / std::sqrt(alpha);
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    ElementGeometry g = element_geometry(mesh, t);
    auto z1v = nodal_on_triangle(mesh, dofs, z1, t);
    auto z2v = nodal_on_triangle(mesh, dofs, z2, t);
    std::array<double, 3> w1 = {-z1v[0] * inv_sa, -z1v[1] * inv_sa, -z1v[2] * inv_sa};
    std::array<double, 3> w2 = {-z2v[0] * inv_sa, -z2v[1] * inv_sa, -z2v[2] * inv_sa};
    ClampRegions r1 = clamp_regions(w1, q_lo, q_hi);

    const std::array<double, 3> const_lo = {q_lo, q_lo, q_lo};
    const std::array<double, 3> const_hi = {q_hi, q_hi, q_hi};
    struct Piece {
      const BaryPolygon* poly;
      const std::array<double, 3>* c1;
    };
    const std::array<Piece, 3> pieces = {
        Piece{&r1.lo, &const_lo}, Piece{&r1.mid, &w1}, Piece{&r1.hi, &const_hi}};

    for (const auto& piece : pieces) {
      if (piece.poly->size() < 3) continue;
      // Split this piece further by the w2 regions.
      BaryPolygon mid2 = *piece.poly;
      if (!box_side_unbounded(q_lo)) {
        BaryPolygon lo2 = clip_polygon(*piece.poly, w2, q_lo, false);
        mid2 = clip_polygon(mid2, w2, q_lo, true);
        if (lo2.size() >= 3) {
          std::array<double, 3> d;
          for (int k = 0; k < 3; ++k) d[k] = (*piece.c1)[k] - q_lo;
          total += integrate_product(g.area, lo2, d, d);
        }
      }
      if (!box_side_unbounded(q_hi)) {
        BaryPolygon hi2 = clip_polygon(*piece.poly, w2, q_hi, true);
        mid2 = clip_polygon(mid2, w2, q_hi, false);
        if (hi2.size() >= 3) {
          std::array<double, 3> d;
          for (int k = 0; k < 3; ++k) d[k] = (*piece.c1)[k] - q_hi;
          total += integrate_product(g.area, hi2, d, d);
        }
      }
      if (mid2.size() >= 3) {
        std::array<double, 3> d;
        for (int k = 0; k < 3; ++k) d[k] = (*piece.c1)[k] - w2[k];
        total += integrate_product(g.area, mid2, d, d);
      }
    }
  }
  return total;
}

}  // namespace qba
