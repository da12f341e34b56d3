#include "qba/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qba {

namespace {
constexpr double kPi = std::numbers::pi;
}

// ---------------------------------------------------------------------------
// constants
// ---------------------------------------------------------------------------

ConstantsBundle make_constants(double alpha, double M, double m_a, double M_a,
                               double mu_h) {
  if (!(alpha > 0.0)) throw std::invalid_argument("make_constants: alpha must be positive");
  ConstantsBundle c;
  c.alpha = alpha;
  c.M_I = M;
  c.M_C = M;
  c.M = M;
  c.m_a = m_a;
  c.M_a = M_a;
  c.mu_h = mu_h;
  const double sa = std::sqrt(alpha);
  c.L = M / sa;
  c.gamma = (M / m_a) * (1.0 + 2.0 * M / sa);
  c.kappa = (1.0 + 2.0 * c.L) / (1.0 + c.L) * (1.0 + c.gamma);
  c.kappa_h = (1.0 + 2.0 * c.L) / (1.0 + c.L) *
              (1.0 + M * (1.0 + 2.0 * M / sa) * mu_h);
  const double cf = c.C_F;
  c.kappa_alpha_example = 2.0 * (1.0 + cf * (1.0 + 2.0 * cf / sa));
  return c;
}

ConstantsBundle constants_bundle(double alpha) {
  return make_constants(alpha, kPoincareUnitSquare, 1.0, 1.0, 1.0);
}

// ---------------------------------------------------------------------------
// manufactured case
// ---------------------------------------------------------------------------

ManufacturedCase manufactured_eigen_case(double alpha) {
  if (!(alpha > 0.0))
    throw std::invalid_argument("manufactured_eigen_case: alpha must be positive");
  ManufacturedCase c;
  c.alpha = alpha;
  const double sa = std::sqrt(alpha);
  const double lam1 = 2.0 * kPi * kPi;  // first Dirichlet eigenvalue
  c.exact_z = sin_pi_sin_pi_field(1.0);
  c.exact_u = sin_pi_sin_pi_field(-1.0 / (lam1 * sa));
  c.exact_q = sin_pi_sin_pi_field(-1.0 / sa);
  c.u_d = sin_pi_sin_pi_field(-1.0 / (lam1 * sa) - lam1 * sa);
  c.description = "eigenfunction family, alpha = " + std::to_string(alpha);
  return c;
}

// ---------------------------------------------------------------------------
// Ritz projection and hierarchy
// ---------------------------------------------------------------------------

std::vector<double> ritz_projection(const TriMesh& mesh, const DofMap& dofs,
                                    const ScalarField& exact) {
  if (!exact.laplacian)
    throw std::invalid_argument("ritz_projection: field needs an evaluable laplacian");
  ScalarField rhs{[&exact](double x, double y) { return -exact.laplacian(x, y); }, {}, {}};
  std::vector<double> F = assemble_load(mesh, dofs, rhs, 7);
  CsrMatrix K = assemble_stiffness(mesh, dofs);
  BandCholesky chol = BandCholesky::factor(K);
  std::vector<double> R = F;
  chol.solve(R);
  return R;
}

MeshHierarchy MeshHierarchy::build(const TriMesh& coarse, int refinements) {
  MeshHierarchy hier;
  hier.meshes.push_back(coarse);
  hier.dofs.push_back(interior_dof_map(coarse));
  for (int r = 0; r < refinements; ++r) {
    RefinedMesh ref = refine_uniform_with_lineage(hier.meshes.back());
    DofMap fine_dofs = interior_dof_map(ref.mesh);
    const DofMap& coarse_dofs = hier.dofs.back();
    CsrBuilder builder(fine_dofs.n_dof, coarse_dofs.n_dof);
    for (std::int32_t d = 0; d < fine_dofs.n_dof; ++d) {
      const std::int32_t w = fine_dofs.dof_to_vertex[d];
      const auto& par = ref.parents[w];
      if (par[0] == par[1]) {
        std::int32_t cd = coarse_dofs.vertex_to_dof[par[0]];
        if (cd >= 0) builder.add(d, cd, 1.0);
      } else {
        for (int k = 0; k < 2; ++k) {
          std::int32_t cd = coarse_dofs.vertex_to_dof[par[k]];
          if (cd >= 0) builder.add(d, cd, 0.5);
        }
      }
    }
    hier.P.push_back(builder.build());
    hier.meshes.push_back(std::move(ref.mesh));
    hier.dofs.push_back(std::move(fine_dofs));
  }
  return hier;
}

std::vector<double> MeshHierarchy::prolong(const std::vector<double>& coarse_x) const {
  std::vector<double> x = coarse_x;
  for (const CsrMatrix& p : P) x = p.matvec(x);
  return x;
}

std::vector<double> MeshHierarchy::restrict_transpose(const std::vector<double>& fine_x) const {
  std::vector<double> x = fine_x;
  for (auto it = P.rbegin(); it != P.rend(); ++it) x = it->transposed().matvec(x);
  return x;
}

double mu_h_compute(const TriMesh& mesh_coarse, const TriMesh& mesh_reference) {
  const int gap = mesh_reference.level - mesh_coarse.level;
  if (gap < 2)
    throw std::invalid_argument(
        "mu_h_compute: reference must be at least two refinements finer");
  MeshHierarchy hier = MeshHierarchy::build(mesh_coarse, gap);
  const TriMesh& rebuilt = hier.meshes.back();
  if (rebuilt.n_vertices() != mesh_reference.n_vertices() ||
      rebuilt.n_triangles() != mesh_reference.n_triangles() ||
      std::abs(rebuilt.h - mesh_reference.h) > 1e-12)
    throw std::invalid_argument("mu_h_compute: reference is not a refinement of coarse");

  const DofMap& cd = hier.dofs.front();
  if (cd.n_dof < 1) throw std::invalid_argument("mu_h_compute: coarse mesh has no dofs");
  CsrMatrix Kc = assemble_stiffness(mesh_coarse, cd);
  CsrMatrix Kf = assemble_stiffness(hier.meshes.back(), hier.dofs.back());
  BandCholesky chol = BandCholesky::factor(Kc);

  // mu_h^2 = lambda_max(Kc^{-1} P^T Kf P): the numerator sup over the
  // reference space reduces to the energy norm of the embedded function.
  LinearOperator opA{cd.n_dof, [&](const double* x, double* y) {
                       std::vector<double> xv(x, x + cd.n_dof);
                       std::vector<double> fine = hier.prolong(xv);
                       fine = Kf.matvec(fine);
                       std::vector<double> back = hier.restrict_transpose(fine);
                       std::copy(back.begin(), back.end(), y);
                     }};
  LinearOperator opB{cd.n_dof, [&Kc](const double* x, double* y) { Kc.matvec(x, y); }};
  auto solveB = [&chol](double* b) { chol.solve(b); };
  double lam_max = generalized_eig_max_op(opA, opB, solveB, 1e-12, 100000);
  return std::sqrt(lam_max);
}

// ---------------------------------------------------------------------------
// norms
// ---------------------------------------------------------------------------

Norms::Norms(const CsrMatrix& K, const CsrMatrix& M, const CsrMatrix* G)
    : K_(&K), M_(&M), G_(G) {}

double Norms::quad(const CsrMatrix& A, const std::vector<double>& v) const {
  if (A.n_rows != static_cast<std::int32_t>(v.size()))
    throw std::invalid_argument("Norms: dimension mismatch");
  std::vector<double> Av = A.matvec(v);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * Av[i];
  return std::max(0.0, s);
}

double Norms::h1(const std::vector<double>& v) const { return std::sqrt(quad(*K_, v)); }
double Norms::l2(const std::vector<double>& v) const { return std::sqrt(quad(*M_, v)); }

double Norms::product(const std::vector<double>& v1, const std::vector<double>& v2) const {
  return std::sqrt(quad(*K_, v1) + quad(*K_, v2));
}

double Norms::enorm(const std::vector<double>& v1, const std::vector<double>& v2) const {
  return std::sqrt(quad(*M_, v1) + quad(G_ ? *G_ : *M_, v2));
}

double Norms::alpha_norm(const std::vector<double>& v1, const std::vector<double>& v2,
                         double alpha, double M, double M_a) const {
  return M_a * product(v1, v2) + M / std::sqrt(alpha) * enorm(v1, v2);
}

// ---------------------------------------------------------------------------
// constrained metrics
// ---------------------------------------------------------------------------

ConstrainedMetrics::ConstrainedMetrics(const TriMesh& mesh, const DofMap& dofs,
                                       const CsrMatrix& K, const CsrMatrix& M,
                                       double alpha, BoxBounds box)
    : mesh_(&mesh), dofs_(&dofs), K_(&K), M_(&M), alpha_(alpha), box_(box) {
  if (!(alpha > 0.0)) throw std::invalid_argument("ConstrainedMetrics: alpha must be positive");
  if (box.lo > box.hi) throw std::invalid_argument("ConstrainedMetrics: invalid box");
}

double ConstrainedMetrics::delta(const std::vector<double>& v1,
                                 const std::vector<double>& v2,
                                 const std::vector<double>& w1,
                                 const std::vector<double>& w2) const {
  double clamp_sq = clamped_difference_l2sq(*mesh_, *dofs_, v2, w2, alpha_, box_.lo, box_.hi);
  std::vector<double> d1(v1.size());
  for (std::size_t i = 0; i < v1.size(); ++i) d1[i] = v1[i] - w1[i];
  std::vector<double> Md1 = M_->matvec(d1);
  double obs_sq = 0.0;
  for (std::size_t i = 0; i < d1.size(); ++i) obs_sq += d1[i] * Md1[i];
  return std::sqrt(alpha_ * clamp_sq + std::max(0.0, obs_sq));
}

double ConstrainedMetrics::d(const std::vector<double>& v1, const std::vector<double>& v2,
                             const std::vector<double>& w1,
                             const std::vector<double>& w2) const {
  Norms norms(*K_, *M_);
  std::vector<double> d1(v1.size()), d2(v2.size());
  for (std::size_t i = 0; i < v1.size(); ++i) d1[i] = v1[i] - w1[i];
  for (std::size_t i = 0; i < v2.size(); ++i) d2[i] = v2[i] - w2[i];
  const double M_a = 1.0;
  const double M = kPoincareUnitSquare;
  return M_a * norms.product(d1, d2) +
         (M / std::sqrt(alpha_)) * delta(v1, v2, w1, w2);
}

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

namespace {

struct TriGeom {
  std::array<std::int32_t, 3> v;
  double area;
  std::array<Vec2, 3> grad;
};

TriGeom tri_geom(const TriMesh& mesh, std::size_t t) {
  TriGeom g;
  g.v = mesh.triangles[t];
  const Vec2& p0 = mesh.vertices[g.v[0]];
  const Vec2& p1 = mesh.vertices[g.v[1]];
  const Vec2& p2 = mesh.vertices[g.v[2]];
  g.area = 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
  const double inv2a = 1.0 / (2.0 * g.area);
  g.grad[0] = {(p1.y - p2.y) * inv2a, (p2.x - p1.x) * inv2a};
  g.grad[1] = {(p2.y - p0.y) * inv2a, (p0.x - p2.x) * inv2a};
  g.grad[2] = {(p0.y - p1.y) * inv2a, (p1.x - p0.x) * inv2a};
  return g;
}

}  // namespace

double h1_seminorm_error(const TriMesh& mesh, const DofMap& dofs,
                         const ScalarField& exact, const std::vector<double>& coeffs) {
  if (!exact.gradient)
    throw std::invalid_argument("h1_seminorm_error: field needs a gradient rule");
  const QuadRule& rule = triangle_rule(7);
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    TriGeom g = tri_geom(mesh, t);
    auto nv = nodal_on_triangle(mesh, dofs, coeffs, t);
    Vec2 gh{nv[0] * g.grad[0].x + nv[1] * g.grad[1].x + nv[2] * g.grad[2].x,
            nv[0] * g.grad[0].y + nv[1] * g.grad[1].y + nv[2] * g.grad[2].y};
    for (const auto& qp : rule.points) {
      const Vec2& p0 = mesh.vertices[g.v[0]];
      const Vec2& p1 = mesh.vertices[g.v[1]];
      const Vec2& p2 = mesh.vertices[g.v[2]];
      double x = qp.lambda[0] * p0.x + qp.lambda[1] * p1.x + qp.lambda[2] * p2.x;
      double y = qp.lambda[0] * p0.y + qp.lambda[1] * p1.y + qp.lambda[2] * p2.y;
      Vec2 ge = exact.gradient(x, y);
      double dx = ge.x - gh.x, dy = ge.y - gh.y;
      total += g.area * qp.weight * (dx * dx + dy * dy);
    }
  }
  return std::sqrt(std::max(0.0, total));
}

double l2_error(const TriMesh& mesh, const DofMap& dofs, const ScalarField& exact,
                const std::vector<double>& coeffs) {
  const QuadRule& rule = triangle_rule(7);
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.n_triangles(); ++t) {
    TriGeom g = tri_geom(mesh, t);
    auto nv = nodal_on_triangle(mesh, dofs, coeffs, t);
    for (const auto& qp : rule.points) {
      const Vec2& p0 = mesh.vertices[g.v[0]];
      const Vec2& p1 = mesh.vertices[g.v[1]];
      const Vec2& p2 = mesh.vertices[g.v[2]];
      double x = qp.lambda[0] * p0.x + qp.lambda[1] * p1.x + qp.lambda[2] * p2.x;
      double y = qp.lambda[0] * p0.y + qp.lambda[1] * p1.y + qp.lambda[2] * p2.y;
      double vh = nv[0] * qp.lambda[0] + nv[1] * qp.lambda[1] + nv[2] * qp.lambda[2];
      double diff = exact.value(x, y) - vh;
      total += g.area * qp.weight * diff * diff;
    }
  }
  return std::sqrt(std::max(0.0, total));
}

std::vector<double> nodal_interpolant(const TriMesh& mesh, const DofMap& dofs,
                                      const ScalarField& f) {
  std::vector<double> x(static_cast<std::size_t>(dofs.n_dof));
  for (std::int32_t d = 0; d < dofs.n_dof; ++d) {
    const Vec2& p = mesh.vertices[dofs.dof_to_vertex[d]];
    x[d] = f.value(p.x, p.y);
  }
  return x;
}

ErrorReport measure_nu(const ManufacturedCase& mcase, const TriMesh& mesh,
                       const DofMap& dofs, const DiscreteSolution& sol) {
  if (std::abs(mcase.alpha - sol.alpha) > 1e-14 * std::max(1.0, mcase.alpha))
    throw std::invalid_argument("measure_nu: alpha of case and solution differ");

  ErrorReport rep;
  rep.level = mesh.level;
  rep.h = mesh.h;
  rep.err_u_h1 = h1_seminorm_error(mesh, dofs, mcase.exact_u, sol.u);
  rep.err_z_h1 = h1_seminorm_error(mesh, dofs, mcase.exact_z, sol.z);
  rep.err_u_l2 = l2_error(mesh, dofs, mcase.exact_u, sol.u);
  rep.err_combined = std::sqrt(rep.err_u_h1 * rep.err_u_h1 + rep.err_z_h1 * rep.err_z_h1);

  const double err_z_l2 = l2_error(mesh, dofs, mcase.exact_z, sol.z);
  rep.err_enorm = std::sqrt(rep.err_u_l2 * rep.err_u_l2 + err_z_l2 * err_z_l2);

  std::vector<double> Ru = ritz_projection(mesh, dofs, mcase.exact_u);
  std::vector<double> Rz = ritz_projection(mesh, dofs, mcase.exact_z);
  const double bu = h1_seminorm_error(mesh, dofs, mcase.exact_u, Ru);
  const double bz = h1_seminorm_error(mesh, dofs, mcase.exact_z, Rz);
  rep.best_combined = std::sqrt(bu * bu + bz * bz);

  if (rep.best_combined < 1e-13) {
    rep.nu_measured = 1.0;
    rep.degenerate = true;
  } else {
    rep.nu_measured = rep.err_combined / rep.best_combined;
  }
  ConstantsBundle c = constants_bundle(mcase.alpha);
  rep.kappa_h_bound = c.kappa_h * c.mu_h;
  return rep;
}

// ---------------------------------------------------------------------------
// monotonicity of b_K
// ---------------------------------------------------------------------------

namespace {

// b_K(v, phi) = v1'K phi2 + phi1'K v2 - N(v2)'phi2 - sigma v1'M phi1
double bK_eval(const CsrMatrix& K, const CsrMatrix& M, const TriMesh& mesh,
               const DofMap& dofs, double alpha, BoxBounds box,
               const std::vector<double>& v1, const std::vector<double>& v2,
               const std::vector<double>& phi1, const std::vector<double>& phi2) {
  const double sigma = 1.0 / std::sqrt(alpha);
  std::vector<double> Kphi2 = K.matvec(phi2);
  std::vector<double> Kv2 = K.matvec(v2);
  std::vector<double> Mphi1 = M.matvec(phi1);
  std::vector<double> N = assemble_clamped_term(mesh, dofs, v2, alpha, box.lo, box.hi);
  double s = 0.0;
  for (std::size_t i = 0; i < v1.size(); ++i) {
    s += v1[i] * Kphi2[i] + phi1[i] * Kv2[i] - N[i] * phi2[i] - sigma * v1[i] * Mphi1[i];
  }
  return s;
}

}  // namespace

MonotonicityReport verify_bK_monotonicity(const TriMesh& mesh, const DofMap& dofs,
                                          double alpha, BoxBounds box, int trials,
                                          unsigned seed) {
  if (dofs.n_dof > 200)
    throw std::invalid_argument("verify_bK_monotonicity: dense-scale mesh required (<= 200 dofs)");
  if (trials < 100)
    throw std::invalid_argument("verify_bK_monotonicity: at least 100 trials required");

  CsrMatrix K = assemble_stiffness(mesh, dofs);
  CsrMatrix M = assemble_mass(mesh, dofs);
  ConstantsBundle c = constants_bundle(alpha);
  ConstrainedMetrics metrics(mesh, dofs, K, M, alpha, box);
  Norms norms(K, M);

  // T_{K,h}(psi) = (1/mu_h)(A^{-1} J psi2, A^{-T} J psi1) + gamma_h (-psi1, psi2),
  // with A = K and Riesz map J = K; the dense solves realize the inverses.
  LuFactor Kf = lu_factor(dense_from_csr(K));
  const double gamma_h = c.M * (1.0 + 2.0 * c.M / std::sqrt(alpha)) * c.mu_h;
  auto applyT = [&](const std::vector<double>& p1, const std::vector<double>& p2,
                    std::vector<double>& t1, std::vector<double>& t2) {
    std::vector<double> Jp2 = K.matvec(p2);
    std::vector<double> Jp1 = K.matvec(p1);
    t1 = lu_solve(Kf, Jp2);
    t2 = lu_solve(Kf, Jp1);
    for (std::size_t i = 0; i < p1.size(); ++i) {
      t1[i] = t1[i] / c.mu_h - gamma_h * p1[i];
      t2[i] = t2[i] / c.mu_h + gamma_h * p2[i];
    }
  };

  const std::size_t n = static_cast<std::size_t>(dofs.n_dof);
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_vec = [&]() {
    std::vector<double> v(n);
    for (double& x : v) x = gauss(rng);
    return v;
  };

  MonotonicityReport rep;
  rep.trials = trials;
  rep.theoretical_bound = 1.0 / (c.kappa_h * c.mu_h);
  rep.min_margin = std::numeric_limits<double>::infinity();

  for (int t = 0; t < trials; ++t) {
    std::vector<double> v1 = random_vec(), v2 = random_vec();
    std::vector<double> w1 = random_vec(), w2 = random_vec();
    std::vector<double> psi1(n), psi2(n);
    for (std::size_t i = 0; i < n; ++i) {
      psi1[i] = v1[i] - w1[i];
      psi2[i] = v2[i] - w2[i];
    }
    std::vector<double> t1, t2;
    applyT(psi1, psi2, t1, t2);
    const double lhs = bK_eval(K, M, mesh, dofs, alpha, box, v1, v2, t1, t2) -
                       bK_eval(K, M, mesh, dofs, alpha, box, w1, w2, t1, t2);
    const double rhs =
        rep.theoretical_bound * metrics.d(v1, v2, w1, w2) * norms.product(t1, t2);
    const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    const double margin = lhs - rhs;
    rep.min_margin = std::min(rep.min_margin, margin);
    if (margin >= -1e-9 * scale) ++rep.passes;
  }

  if (box_side_unbounded(box.lo) && box_side_unbounded(box.hi)) {
    // Linear case: the bound must be consistent with the computed inf-sup
    // constant of the dense system under (product norm, alpha test norm).
    const double sigma = 1.0 / std::sqrt(alpha);
    const int nn = static_cast<int>(n);
    Dense B(2 * nn, 2 * nn);
    Dense Kd = dense_from_csr(K), Md = dense_from_csr(M);
    for (int i = 0; i < nn; ++i)
      for (int j = 0; j < nn; ++j) {
        B(i, j) = -sigma * Md(i, j);
        B(i, nn + j) = Kd(i, j);
        B(nn + i, j) = Kd(i, j);
        B(nn + i, nn + j) = sigma * Md(i, j);
      }
    Dense Gtr(2 * nn, 2 * nn), Gte(2 * nn, 2 * nn);
    const double w = c.M * c.M / alpha;
    for (int i = 0; i < nn; ++i)
      for (int j = 0; j < nn; ++j) {
        Gtr(i, j) = Kd(i, j);
        Gtr(nn + i, nn + j) = Kd(i, j);
        Gte(i, j) = Kd(i, j) + w * Md(i, j);
        Gte(nn + i, nn + j) = Kd(i, j) + w * Md(i, j);
      }
    rep.computed_inf_sup = inf_sup_constant(B, Gtr, Gte);
  }
  return rep;
}

double fit_rate(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2)
    throw std::invalid_argument("fit_rate: need matching sizes >= 2");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]);
    const double y = std::log(std::max(err[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace qba
