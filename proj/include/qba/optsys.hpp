#ifndef QBA_OPTSYS_HPP
#define QBA_OPTSYS_HPP

#include <optional>
#include <vector>

#include "qba/fem.hpp"
#include "qba/linalg.hpp"
#include "qba/mesh.hpp"

namespace qba {

enum class ControlVariant { Full, PiecewiseConstant };
enum class ConstrainedMethod { FixedPoint, SemismoothNewton };

struct BoxBounds {
  double lo = -kUnboundedBox;
  double hi = kUnboundedBox;
};

/// Instance of the quadratic optimal-control model problem: Tikhonov weight,
/// desired state, control discretization variant, optional box constraints.
struct ModelProblem {
  double alpha = 1.0;
  ScalarField u_d = zero_field();
  ControlVariant control_variant = ControlVariant::Full;
  std::optional<BoxBounds> box;

  void validate() const;
};

/// Coefficient vectors of the discrete state u_h and rescaled adjoint z_h,
/// plus the recovered control. For the Full variant q_repr holds P1
/// coefficients of -z/sqrt(alpha) (pointwise clamped when a box is active);
/// for PiecewiseConstant it holds per-triangle means.
struct DiscreteSolution {
  std::vector<double> u;
  std::vector<double> z;
  std::vector<double> q_repr;
  double solver_residual = 0.0;
  double alpha = 1.0;
  ControlVariant variant = ControlVariant::Full;
  int outer_iterations = 0;                // constrained solves only
  std::vector<double> residual_history;    // constrained solves only
};

// Blocks [[-s*M, K], [K, s*Mc]] with s = 1/sqrt(alpha) and Mc = M (Full) or
// the P0 Gram (PiecewiseConstant); rhs = (-s*load(u_d), 0).
BlockSystem assemble_reduced_system(const TriMesh& mesh, const DofMap& dofs,
                                    const ModelProblem& prob);

DiscreteSolution solve_unconstrained(const TriMesh& mesh, const DofMap& dofs,
                                     const ModelProblem& prob, double tol = 1e-10,
                                     int max_iter = 400000);

DiscreteSolution solve_box_constrained(const TriMesh& mesh, const DofMap& dofs,
                                       const ModelProblem& prob, ConstrainedMethod method,
                                       double tol, int max_iter);

// Dual-norm size of the P0 consistency perturbation (G - M) z, measured
// against the Hilbert realization of the alpha-weighted test norm.
// Rejects the Full variant, whose gap vanishes identically.
double consistency_gap(const TriMesh& mesh, const DofMap& dofs,
                       const ModelProblem& prob, const std::vector<double>& z);

}  // namespace qba

#endif
