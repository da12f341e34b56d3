#ifndef QBA_ANALYSIS_HPP
#define QBA_ANALYSIS_HPP

#include <string>
#include <vector>

#include "qba/fem.hpp"
#include "qba/linalg.hpp"
#include "qba/mesh.hpp"
#include "qba/optsys.hpp"

namespace qba {

// ---------------------------------------------------------------------------
// constants of the reduced optimality system
// ---------------------------------------------------------------------------

/// All derived constants of the stability theory for one parameter set.
/// kappa = (1+2L)/(1+L) * (1+gamma) with L = M/sqrt(alpha) and
/// gamma = (M/m_a)(1 + 2M/sqrt(alpha)); kappa_h replaces 1/m_a by mu_h.
struct ConstantsBundle {
  double alpha = 1.0;
  double C_F = kPoincareUnitSquare;
  double M_I = kPoincareUnitSquare;
  double M_C = kPoincareUnitSquare;
  double M = kPoincareUnitSquare;  // max(M_I, M_C)
  double m_a = 1.0;
  double M_a = 1.0;
  double mu_h = 1.0;
  double L = 0.0;
  double gamma = 0.0;
  double kappa = 1.0;
  double kappa_h = 1.0;
  double kappa_alpha_example = 0.0;  // 2(1 + C_F(1 + 2 C_F/sqrt(alpha)))
};

ConstantsBundle make_constants(double alpha, double M, double m_a, double M_a,
                               double mu_h);
// Model-problem instance on the unit square: M = C_F, m_a = M_a = 1, mu_h = 1.
ConstantsBundle constants_bundle(double alpha);

// ---------------------------------------------------------------------------
// manufactured solutions
// ---------------------------------------------------------------------------

/// Exact solution triple of the optimality system built on the first
/// Dirichlet eigenfunction: z = sin(pi x) sin(pi y), u = -z/(2 pi^2 sqrt(a)),
/// q = -z/sqrt(a), u_d = u - 2 pi^2 sqrt(a) z.
struct ManufacturedCase {
  double alpha = 1.0;
  ScalarField exact_u, exact_z, exact_q, u_d;
  std::string description;
};

ManufacturedCase manufactured_eigen_case(double alpha);

// ---------------------------------------------------------------------------
// projections, prolongation, mu_h
// ---------------------------------------------------------------------------

// Galerkin projection onto the P1 space: solves K R = load(-lap(exact)).
// Requires exact.laplacian.
std::vector<double> ritz_projection(const TriMesh& mesh, const DofMap& dofs,
                                    const ScalarField& exact);

/// Chain of uniform refinements with interior-dof prolongations between
/// consecutive levels.
struct MeshHierarchy {
  std::vector<TriMesh> meshes;
  std::vector<DofMap> dofs;
  std::vector<CsrMatrix> P;  // P[i]: level i -> level i+1

  static MeshHierarchy build(const TriMesh& coarse, int refinements);
  std::vector<double> prolong(const std::vector<double>& coarse_x) const;
  std::vector<double> restrict_transpose(const std::vector<double>& fine_x) const;
};

// Quasi-best-approximation constant of the constraint discretization with the
// adjoint test norm, with the continuous sup replaced by the sup over a
// reference space at least two refinements finer. For the symmetric
// Laplacian on nested spaces this evaluates to 1 up to roundoff.
double mu_h_compute(const TriMesh& mesh_coarse, const TriMesh& mesh_reference);

// ---------------------------------------------------------------------------
// norms and metrics
// ---------------------------------------------------------------------------

/// Norm evaluators bound to assembled Gram matrices. G, when present,
/// replaces M in the control slot of the |.| seminorm (P0 variant).
class Norms {
 public:
  Norms(const CsrMatrix& K, const CsrMatrix& M, const CsrMatrix* G = nullptr);

  double h1(const std::vector<double>& v) const;
  double l2(const std::vector<double>& v) const;
  double product(const std::vector<double>& v1, const std::vector<double>& v2) const;
  double enorm(const std::vector<double>& v1, const std::vector<double>& v2) const;
  // M_a * product + (M/sqrt(alpha)) * enorm
  double alpha_norm(const std::vector<double>& v1, const std::vector<double>& v2,
                    double alpha, double M, double M_a = 1.0) const;

 private:
  double quad(const CsrMatrix& A, const std::vector<double>& v) const;
  const CsrMatrix* K_;
  const CsrMatrix* M_;
  const CsrMatrix* G_;
};

/// delta_{K,alpha} pseudometric and d_{K,alpha} metric of the constrained
/// theory, with exact integration of the clamped differences.
class ConstrainedMetrics {
 public:
  ConstrainedMetrics(const TriMesh& mesh, const DofMap& dofs, const CsrMatrix& K,
                     const CsrMatrix& M, double alpha, BoxBounds box);

  double delta(const std::vector<double>& v1, const std::vector<double>& v2,
               const std::vector<double>& w1, const std::vector<double>& w2) const;
  double d(const std::vector<double>& v1, const std::vector<double>& v2,
           const std::vector<double>& w1, const std::vector<double>& w2) const;

 private:
  const TriMesh* mesh_;
  const DofMap* dofs_;
  const CsrMatrix* K_;
  const CsrMatrix* M_;
  double alpha_;
  BoxBounds box_;
};

// ---------------------------------------------------------------------------
// error reports
// ---------------------------------------------------------------------------

struct ErrorReport {
  int level = 0;
  double h = 0.0;
  double err_u_h1 = 0.0;
  double err_z_h1 = 0.0;
  double err_u_l2 = 0.0;
  double err_combined = 0.0;
  double err_enorm = 0.0;
  double best_combined = 0.0;
  double nu_measured = 1.0;
  bool degenerate = false;
  double kappa_h_bound = 0.0;
  double d_K_alpha = 0.0;       // constrained runs
  double consistency_gap = 0.0; // P0 runs
};

// Errors of a discrete solution against the manufactured exact fields
// (order-7 quadrature); best approximation via componentwise Ritz
// projections, which realize the infimum in the H1 x H1 product seminorm.
ErrorReport measure_nu(const ManufacturedCase& mcase, const TriMesh& mesh,
                       const DofMap& dofs, const DiscreteSolution& sol);

// quadrature-based distances between an exact field and a P1 function
double h1_seminorm_error(const TriMesh& mesh, const DofMap& dofs,
                         const ScalarField& exact, const std::vector<double>& coeffs);
double l2_error(const TriMesh& mesh, const DofMap& dofs, const ScalarField& exact,
                const std::vector<double>& coeffs);
std::vector<double> nodal_interpolant(const TriMesh& mesh, const DofMap& dofs,
                                      const ScalarField& f);

// ---------------------------------------------------------------------------
// monotonicity verification for the constrained form
// ---------------------------------------------------------------------------

struct MonotonicityReport {
  int trials = 0;
  int passes = 0;
  double min_margin = 0.0;       // min over trials of lhs - rhs
  double theoretical_bound = 0.0;  // 1/(kappa_h * mu_h)
  double computed_inf_sup = 0.0;   // only for an unbounded box (linear case)
};

// Evaluates b_K(v,phi) - b_K(w,phi) against the lower bound
// d_{K,alpha}(v,w) ||T_{K,h}(v-w)|| / (kappa_h mu_h) on random pairs, with
// T_{K,h} realized through dense inverses. For an unbounded box the bound is
// additionally cross-checked against the computed inf-sup constant.
MonotonicityReport verify_bK_monotonicity(const TriMesh& mesh, const DofMap& dofs,
                                          double alpha, BoxBounds box, int trials,
                                          unsigned seed = 42);

// Least-squares slope of log(err) vs log(h); expects matching sizes >= 2.
double fit_rate(const std::vector<double>& h, const std::vector<double>& err);

}  // namespace qba

#endif
