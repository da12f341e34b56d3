#ifndef QBA_MESH_HPP
#define QBA_MESH_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace qba {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Poincare-Friedrichs constant of the unit square, 1/(sqrt(2)*pi); the
// continuous constant bounds its discrete counterparts on every submesh.
inline constexpr double kPoincareUnitSquare = 0.22507907903927651;

/// Conforming P1 triangulation of the unit square. Immutable after
/// construction; safe for concurrent read access.
struct TriMesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<std::int32_t, 3>> triangles;  // counterclockwise
  std::vector<bool> boundary_mask;  // true iff vertex lies on the boundary
  int level = 0;                    // refinement generation
  double h = 0.0;                   // longest edge length

  std::size_t n_vertices() const { return vertices.size(); }
  std::size_t n_triangles() const { return triangles.size(); }

  double triangle_area(std::size_t t) const;
  double total_area() const;
  // max over triangles of (longest edge)/(inradius)
  double shape_regularity() const;
  // every interior edge shared by exactly two triangles, boundary edges by one
  bool is_conforming() const;
};

/// Maps interior vertices to contiguous dof indices (lexicographic by
/// vertex index); boundary vertices map to -1.
struct DofMap {
  std::vector<std::int32_t> vertex_to_dof;
  std::vector<std::int32_t> dof_to_vertex;
  std::int32_t n_dof = 0;
};

// n x n grid of squares split along the lower-left/upper-right diagonal:
// 2n^2 triangles, (n+1)^2 vertices, h = sqrt(2)/n. Rejects n = 0.
TriMesh build_uniform_unit_square(int n);

// Each triangle split into 4 congruent children via edge midpoints.
TriMesh refine_uniform(const TriMesh& mesh);

/// Refinement with lineage: parents[v] are the endpoints of the edge whose
/// midpoint created vertex v ({v, v} for carried-over vertices). This is
/// what coarse-to-fine prolongation is built from.
struct RefinedMesh {
  TriMesh mesh;
  std::vector<std::array<std::int32_t, 2>> parents;
};
RefinedMesh refine_uniform_with_lineage(const TriMesh& mesh);

DofMap interior_dof_map(const TriMesh& mesh);
// All vertices as dofs (no Dirichlet elimination); test/diagnostic use.
DofMap all_vertex_dof_map(const TriMesh& mesh);

// Equality up to vertex renumbering (sorted coordinates and canonicalized
// triangle lists compare equal).
bool structurally_equal(const TriMesh& a, const TriMesh& b, double tol = 1e-14);

// Plain-text dump: header "n_vertices n_triangles", vertex lines
// "x y boundary_flag", triangle lines "i j k".
void dump_mesh(const TriMesh& mesh, std::ostream& os);

}  // namespace qba

#endif
