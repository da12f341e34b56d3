#include "qba/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace qba {

namespace {

double edge_len(const Vec2& a, const Vec2& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

bool on_boundary(const Vec2& p) {
  constexpr double tol = 1e-14;
  return std::abs(p.x) <= tol || std::abs(p.x - 1.0) <= tol ||
         std::abs(p.y) <= tol || std::abs(p.y - 1.0) <= tol;
}

double longest_edge(const TriMesh& m) {
  double h = 0.0;
  for (const auto& t : m.triangles) {
    h = std::max(h, edge_len(m.vertices[t[0]], m.vertices[t[1]]));
    h = std::max(h, edge_len(m.vertices[t[1]], m.vertices[t[2]]));
    h = std::max(h, edge_len(m.vertices[t[2]], m.vertices[t[0]]));
  }
  return h;
}

}  // namespace

double TriMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Vec2& a = vertices[tri[0]];
  const Vec2& b = vertices[tri[1]];
  const Vec2& c = vertices[tri[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double TriMesh::total_area() const {
  double s = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) s += triangle_area(t);
  return s;
}

double TriMesh::shape_regularity() const {
  double worst = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    double la = edge_len(vertices[tri[1]], vertices[tri[2]]);
    double lb = edge_len(vertices[tri[2]], vertices[tri[0]]);
    double lc = edge_len(vertices[tri[0]], vertices[tri[1]]);
    double s = 0.5 * (la + lb + lc);
    double inradius = triangle_area(t) / s;
    worst = std::max(worst, std::max({la, lb, lc}) / inradius);
  }
  return worst;
}

bool TriMesh::is_conforming() const {
  std::map<std::pair<std::int32_t, std::int32_t>, int> edge_count;
  for (const auto& tri : triangles) {
    for (int e = 0; e < 3; ++e) {
      std::int32_t a = tri[e], b = tri[(e + 1) % 3];
      edge_count[{std::min(a, b), std::max(a, b)}] += 1;
    }
  }
  for (const auto& [edge, count] : edge_count) {
    bool boundary_edge = boundary_mask[edge.first] && boundary_mask[edge.second];
    if (count > 2) return false;
    if (count == 1 && !boundary_edge) return false;
  }
  return true;
}

TriMesh build_uniform_unit_square(int n) {
  if (n < 1) throw std::invalid_argument("build_uniform_unit_square: n must be >= 1");
  TriMesh m;
  const int nv = n + 1;
  m.vertices.reserve(static_cast<std::size_t>(nv) * nv);
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nv; ++i)
      m.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
  m.triangles.reserve(2u * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      std::int32_t ll = j * nv + i;
      std::int32_t lr = ll + 1;
      std::int32_t ul = ll + nv;
      std::int32_t ur = ul + 1;
      m.triangles.push_back({ll, lr, ur});
      m.triangles.push_back({ll, ur, ul});
    }
  }
  m.boundary_mask.resize(m.vertices.size());
  for (std::size_t v = 0; v < m.vertices.size(); ++v)
    m.boundary_mask[v] = on_boundary(m.vertices[v]);
  m.level = 0;
  m.h = longest_edge(m);
  return m;
}

RefinedMesh refine_uniform_with_lineage(const TriMesh& mesh) {
  RefinedMesh out;
  TriMesh& f = out.mesh;
  f.vertices = mesh.vertices;
  out.parents.reserve(mesh.n_vertices());
  for (std::int32_t v = 0; v < static_cast<std::int32_t>(mesh.n_vertices()); ++v)
    out.parents.push_back({v, v});

  std::map<std::pair<std::int32_t, std::int32_t>, std::int32_t> midpoint;
  auto mid = [&](std::int32_t a, std::int32_t b) {
    auto key = std::make_pair(std::min(a, b), std::max(a, b));
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const Vec2& pa = mesh.vertices[a];
    const Vec2& pb = mesh.vertices[b];
    std::int32_t idx = static_cast<std::int32_t>(f.vertices.size());
    f.vertices.push_back({0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
    out.parents.push_back({key.first, key.second});
    midpoint.emplace(key, idx);
    return idx;
  };

  f.triangles.reserve(4 * mesh.n_triangles());
  for (const auto& t : mesh.triangles) {
    std::int32_t m01 = mid(t[0], t[1]);
    std::int32_t m12 = mid(t[1], t[2]);
    std::int32_t m20 = mid(t[2], t[0]);
    f.triangles.push_back({t[0], m01, m20});
    f.triangles.push_back({m01, t[1], m12});
    f.triangles.push_back({m20, m12, t[2]});
    f.triangles.push_back({m01, m12, m20});
  }
  // Renumber lexicographically (by y, then x): keeps the dof ordering of the
  // uniform family and its small matrix bandwidth across refinements.
  std::vector<std::int32_t> order(f.vertices.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
  std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    const Vec2& p = f.vertices[a];
    const Vec2& q = f.vertices[b];
    if (p.y != q.y) return p.y < q.y;
    return p.x < q.x;
  });
  std::vector<std::int32_t> new_index(f.vertices.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) new_index[order[rank]] = static_cast<std::int32_t>(rank);

  std::vector<Vec2> sorted_vertices(f.vertices.size());
  std::vector<std::array<std::int32_t, 2>> sorted_parents(f.vertices.size());
  for (std::size_t old = 0; old < f.vertices.size(); ++old) {
    sorted_vertices[new_index[old]] = f.vertices[old];
    sorted_parents[new_index[old]] = out.parents[old];
  }
  f.vertices = std::move(sorted_vertices);
  out.parents = std::move(sorted_parents);
  for (auto& tri : f.triangles)
    for (auto& v : tri) v = new_index[v];

  f.boundary_mask.resize(f.vertices.size());
  for (std::size_t v = 0; v < f.vertices.size(); ++v)
    f.boundary_mask[v] = on_boundary(f.vertices[v]);
  f.level = mesh.level + 1;
  f.h = longest_edge(f);
  return out;
}

TriMesh refine_uniform(const TriMesh& mesh) {
  return refine_uniform_with_lineage(mesh).mesh;
}

DofMap interior_dof_map(const TriMesh& mesh) {
  DofMap d;
  d.vertex_to_dof.assign(mesh.n_vertices(), -1);
  for (std::int32_t v = 0; v < static_cast<std::int32_t>(mesh.n_vertices()); ++v) {
    if (!mesh.boundary_mask[v]) {
      d.vertex_to_dof[v] = d.n_dof++;
      d.dof_to_vertex.push_back(v);
    }
  }
  return d;
}

DofMap all_vertex_dof_map(const TriMesh& mesh) {
  DofMap d;
  d.vertex_to_dof.resize(mesh.n_vertices());
  d.dof_to_vertex.resize(mesh.n_vertices());
  for (std::int32_t v = 0; v < static_cast<std::int32_t>(mesh.n_vertices()); ++v) {
    d.vertex_to_dof[v] = v;
    d.dof_to_vertex[v] = v;
  }
  d.n_dof = static_cast<std::int32_t>(mesh.n_vertices());
  return d;
}

bool structurally_equal(const TriMesh& a, const TriMesh& b, double tol) {
  if (a.n_vertices() != b.n_vertices() || a.n_triangles() != b.n_triangles())
    return false;

  auto sorted_order = [&](const TriMesh& m) {
    std::vector<std::int32_t> order(m.n_vertices());
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = static_cast<std::int32_t>(i);
    std::sort(order.begin(), order.end(), [&](std::int32_t u, std::int32_t v) {
      const Vec2& p = m.vertices[u];
      const Vec2& q = m.vertices[v];
      if (p.y != q.y) return p.y < q.y;
      return p.x < q.x;
    });
    return order;
  };
  auto oa = sorted_order(a);
  auto ob = sorted_order(b);
  for (std::size_t i = 0; i < oa.size(); ++i) {
    const Vec2& p = a.vertices[oa[i]];
    const Vec2& q = b.vertices[ob[i]];
    if (std::abs(p.x - q.x) > tol || std::abs(p.y - q.y) > tol) return false;
  }

  auto canonical_triangles = [&](const TriMesh& m, const std::vector<std::int32_t>& order) {
    std::vector<std::int32_t> rank(m.n_vertices());
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<std::int32_t>(i);
    std::vector<std::array<std::int32_t, 3>> tris;
    tris.reserve(m.n_triangles());
    for (const auto& t : m.triangles) {
      std::array<std::int32_t, 3> r = {rank[t[0]], rank[t[1]], rank[t[2]]};
      std::sort(r.begin(), r.end());
      tris.push_back(r);
    }
    std::sort(tris.begin(), tris.end());
    return tris;
  };
  return canonical_triangles(a, oa) == canonical_triangles(b, ob);
}

void dump_mesh(const TriMesh& mesh, std::ostream& os) {
  os << mesh.n_vertices() << " " << mesh.n_triangles() << "\n";
  os.precision(17);
  for (std::size_t v = 0; v < mesh.n_vertices(); ++v)
    os << mesh.vertices[v].x << " " << mesh.vertices[v].y << " "
       << (mesh.boundary_mask[v] ? 1 : 0) << "\n";
  for (const auto& t : mesh.triangles)
    os << t[0] << " " << t[1] << " " << t[2] << "\n";
}

}  // namespace qba
