#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "qba/mesh.hpp"

using namespace qba;

TEST_CASE("smallest grid") {
  TriMesh m = build_uniform_unit_square(1);
  CHECK(m.n_triangles() == 2);
  CHECK(m.n_vertices() == 4);
  CHECK(m.h == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(interior_dof_map(m).n_dof == 0);
  CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("n=2 counts") {
  TriMesh m = build_uniform_unit_square(2);
  CHECK(m.n_triangles() == 8);
  CHECK(m.n_vertices() == 9);
  CHECK(interior_dof_map(m).n_dof == 1);
  CHECK(m.h == doctest::Approx(std::sqrt(2.0) / 2.0));
}

TEST_CASE("build rejects n = 0") {
  CHECK_THROWS_AS(build_uniform_unit_square(0), std::invalid_argument);
}

TEST_CASE("areas sum to one across the family") {
  TriMesh m = build_uniform_unit_square(8);
  for (int level = 0; level < 4; ++level) {
    CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t t = 0; t < m.n_triangles(); ++t)
      CHECK(m.triangle_area(t) > 0.0);
    m = refine_uniform(m);
  }
}

TEST_CASE("refinement halves h exactly and increments level") {
  TriMesh m = build_uniform_unit_square(2);
  TriMesh r = refine_uniform(m);
  CHECK(r.h == m.h / 2.0);
  CHECK(r.level == m.level + 1);
  TriMesh rr = refine_uniform(r);
  CHECK(rr.h == doctest::Approx(std::sqrt(2.0) / 8.0).epsilon(1e-15));
}

TEST_CASE("refine(build(1)) is structurally build(2)") {
  TriMesh a = refine_uniform(build_uniform_unit_square(1));
  TriMesh b = build_uniform_unit_square(2);
  CHECK(a.n_triangles() == 8);
  CHECK(structurally_equal(a, b));
  CHECK_FALSE(structurally_equal(a, build_uniform_unit_square(3)));
}

TEST_CASE("dof counts are (n-1)^2") {
  for (int n : {2, 3, 4, 8, 16}) {
    TriMesh m = build_uniform_unit_square(n);
    CHECK(interior_dof_map(m).n_dof == (n - 1) * (n - 1));
  }
  CHECK(interior_dof_map(build_uniform_unit_square(4)).n_dof == 9);
}

TEST_CASE("dof map is a deterministic bijection") {
  TriMesh m = build_uniform_unit_square(8);
  DofMap d = interior_dof_map(m);
  for (std::int32_t i = 0; i < d.n_dof; ++i) {
    CHECK(d.vertex_to_dof[d.dof_to_vertex[i]] == i);
    CHECK_FALSE(m.boundary_mask[d.dof_to_vertex[i]]);
  }
  // lexicographic: dof_to_vertex strictly increasing
  for (std::int32_t i = 1; i < d.n_dof; ++i)
    CHECK(d.dof_to_vertex[i] > d.dof_to_vertex[i - 1]);
}

TEST_CASE("boundary mask matches coordinates") {
  TriMesh m = refine_uniform(build_uniform_unit_square(3));
  for (std::size_t v = 0; v < m.n_vertices(); ++v) {
    const Vec2& p = m.vertices[v];
    bool expected = std::abs(p.x) <= 1e-14 || std::abs(p.x - 1.0) <= 1e-14 ||
                    std::abs(p.y) <= 1e-14 || std::abs(p.y - 1.0) <= 1e-14;
    CHECK(m.boundary_mask[v] == expected);
  }
}

TEST_CASE("conformity holds through level 6") {
  TriMesh m = build_uniform_unit_square(1);
  for (int level = 0; level <= 6; ++level) {
    CHECK(m.is_conforming());
    if (level < 6) m = refine_uniform(m);
  }
}

TEST_CASE("shape regularity constant is level-independent") {
  TriMesh m = build_uniform_unit_square(2);
  const double rho0 = m.shape_regularity();
  // right isosceles triangle: hypotenuse / inradius = sqrt(2)/(1 - 1/sqrt(2))
  CHECK(rho0 == doctest::Approx(std::sqrt(2.0) / (1.0 - 1.0 / std::sqrt(2.0))).epsilon(1e-12));
  for (int level = 0; level < 4; ++level) {
    m = refine_uniform(m);
    CHECK(m.shape_regularity() == doctest::Approx(rho0).epsilon(1e-12));
  }
}

TEST_CASE("mesh dump format") {
  TriMesh m = build_uniform_unit_square(1);
  std::ostringstream os;
  dump_mesh(m, os);
  std::istringstream is(os.str());
  std::size_t nv, nt;
  is >> nv >> nt;
  CHECK(nv == 4);
  CHECK(nt == 2);
  double x, y;
  int flag;
  for (std::size_t v = 0; v < nv; ++v) {
    is >> x >> y >> flag;
    CHECK(flag == 1);  // all vertices of build(1) are boundary
  }
  int i, j, k;
  for (std::size_t t = 0; t < nt; ++t) {
    is >> i >> j >> k;
    CHECK(i >= 0);
    CHECK(k < static_cast<int>(nv));
  }
  CHECK(is.good());
}

TEST_CASE("lineage covers old vertices and midpoints") {
  TriMesh m = build_uniform_unit_square(2);
  RefinedMesh r = refine_uniform_with_lineage(m);
  REQUIRE(r.parents.size() == r.mesh.n_vertices());
  std::size_t carried = 0;
  for (std::size_t v = 0; v < r.mesh.n_vertices(); ++v) {
    const auto& p = r.parents[v];
    if (p[0] == p[1]) {
      ++carried;
      CHECK(r.mesh.vertices[v].x == doctest::Approx(m.vertices[p[0]].x).epsilon(1e-15));
      CHECK(r.mesh.vertices[v].y == doctest::Approx(m.vertices[p[0]].y).epsilon(1e-15));
    } else {
      const Vec2& a = m.vertices[p[0]];
      const Vec2& b = m.vertices[p[1]];
      CHECK(r.mesh.vertices[v].x == doctest::Approx(0.5 * (a.x + b.x)).epsilon(1e-15));
      CHECK(r.mesh.vertices[v].y == doctest::Approx(0.5 * (a.y + b.y)).epsilon(1e-15));
    }
  }
  CHECK(carried == m.n_vertices());
}

TEST_CASE("refined meshes keep the lexicographic vertex ordering") {
  TriMesh r = refine_uniform(build_uniform_unit_square(4));
  TriMesh direct = build_uniform_unit_square(8);
  REQUIRE(r.n_vertices() == direct.n_vertices());
  for (std::size_t v = 0; v < r.n_vertices(); ++v) {
    CHECK(r.vertices[v].x == doctest::Approx(direct.vertices[v].x).epsilon(1e-15));
    CHECK(r.vertices[v].y == doctest::Approx(direct.vertices[v].y).epsilon(1e-15));
  }
}
