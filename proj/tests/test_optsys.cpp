#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "qba/analysis.hpp"
#include "qba/cli.hpp"
#include "qba/optsys.hpp"

using namespace qba;

namespace {

ModelProblem manufactured_problem(double alpha,
                                  ControlVariant variant = ControlVariant::Full) {
  ManufacturedCase c = manufactured_eigen_case(alpha);
  ModelProblem prob;
  prob.alpha = alpha;
  prob.u_d = c.u_d;
  prob.control_variant = variant;
  return prob;
}

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("model problem validation") {
  ModelProblem prob;
  prob.alpha = -1.0;
  CHECK_THROWS_AS(prob.validate(), std::invalid_argument);
  prob.alpha = 1.0;
  prob.box = BoxBounds{1.0, -1.0};
  CHECK_THROWS_AS(prob.validate(), std::invalid_argument);
  prob.box = BoxBounds{-1.0, 1.0};
  CHECK_NOTHROW(prob.validate());
}

TEST_CASE("reduced system on build(2): hand-assembled 2x2 blocks") {
  // single dof: K = [4], M = [1/8]; at alpha = 1 the block matrix is
  // [[-1/8, 4], [4, 1/8]]
  TriMesh mesh = build_uniform_unit_square(2);
  DofMap dofs = interior_dof_map(mesh);
  ModelProblem prob = manufactured_problem(1.0);
  BlockSystem sys = assemble_reduced_system(mesh, dofs, prob);
  REQUIRE(sys.n1() == 1);
  REQUIRE(sys.n2() == 1);
  CHECK(sys.B11.values[0] == doctest::Approx(-0.125).epsilon(1e-14));
  CHECK(sys.B12.values[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(sys.B21.values[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(sys.B22.values[0] == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(sys.rhs[1] == 0.0);

  // hand solve [[-m, k],[k, m]] (u,z) = (r, 0): u = -m r/(m^2+k^2), z = k r/(m^2+k^2)
  const double m = 0.125, k = 4.0, r = sys.rhs[0];
  BlockSolveResult res = solve_sym_indefinite(sys, 1e-13, 1000);
  require_converged(res.report, "build2");
  CHECK(res.x[0] == doctest::Approx(-m * r / (m * m + k * k)).epsilon(1e-12));
  CHECK(res.x[1] == doctest::Approx(k * r / (m * m + k * k)).epsilon(1e-12));
}

TEST_CASE("assembled system is symmetric and rhs second block is zero") {
  TriMesh mesh = build_uniform_unit_square(8);
  DofMap dofs = interior_dof_map(mesh);
  for (ControlVariant variant :
       {ControlVariant::Full, ControlVariant::PiecewiseConstant}) {
    ModelProblem prob = manufactured_problem(0.01, variant);
    BlockSystem sys = assemble_reduced_system(mesh, dofs, prob);
    CHECK_NOTHROW(sys.check_symmetric(1e-13));
    for (std::int32_t i = 0; i < sys.n2(); ++i) CHECK(sys.rhs[sys.n1() + i] == 0.0);
  }
}

TEST_CASE("zero desired state gives the zero solution") {
  TriMesh mesh = build_uniform_unit_square(8);
  DofMap dofs = interior_dof_map(mesh);
  ModelProblem prob;
  prob.alpha = 1.0;
  prob.u_d = zero_field();
  DiscreteSolution sol = solve_unconstrained(mesh, dofs, prob);
  CHECK(vec_norm(sol.u) == 0.0);
  CHECK(vec_norm(sol.z) == 0.0);
  CHECK(vec_norm(sol.q_repr) == 0.0);
}

TEST_CASE("zero-dof mesh is rejected by the solver entry points") {
  TriMesh mesh = build_uniform_unit_square(1);
  DofMap dofs = interior_dof_map(mesh);
  ModelProblem prob = manufactured_problem(1.0);
  CHECK_THROWS_AS(assemble_reduced_system(mesh, dofs, prob), std::invalid_argument);
}

TEST_CASE("unconstrained solve satisfies both optimality rows") {
  TriMesh mesh = build_uniform_unit_square(16);
  DofMap dofs = interior_dof_map(mesh);
  for (double alpha : {1.0, 1e-2, 1e-4}) {
    ModelProblem prob = manufactured_problem(alpha);
    DiscreteSolution sol = solve_unconstrained(mesh, dofs, prob, 1e-11);
    CHECK(sol.solver_residual <= 1e-11);

    const double sigma = 1.0 / std::sqrt(alpha);
    CsrMatrix K = assemble_stiffness(mesh, dofs);
    CsrMatrix M = assemble_mass(mesh, dofs);
    std::vector<double> F = assemble_load(mesh, dofs, prob.u_d, 4);
    const std::size_t n = sol.u.size();

    // row 1: K z - sigma M u + sigma F = 0
    std::vector<double> r1 = K.matvec(sol.z);
    M.matvec_add(-sigma, sol.u.data(), r1.data());
    for (std::size_t i = 0; i < n; ++i) r1[i] += sigma * F[i];
    // row 2: K u + sigma M z = 0
    std::vector<double> r2 = K.matvec(sol.u);
    M.matvec_add(sigma, sol.z.data(), r2.data());

    const double scale = sigma * vec_norm(F);
    CHECK(vec_norm(r1) <= 1e-10 * scale);
    CHECK(vec_norm(r2) <= 1e-10 * scale);
  }
}

TEST_CASE("control recovery is exact by construction") {
  TriMesh mesh = build_uniform_unit_square(8);
  DofMap dofs = interior_dof_map(mesh);
  const double alpha = 0.25;

  ModelProblem full = manufactured_problem(alpha, ControlVariant::Full);
  DiscreteSolution s1 = solve_unconstrained(mesh, dofs, full);
  for (std::size_t i = 0; i < s1.u.size(); ++i)
    CHECK(s1.q_repr[i] + s1.z[i] / std::sqrt(alpha) == doctest::Approx(0.0).epsilon(1e-15));

  ModelProblem p0 = manufactured_problem(alpha, ControlVariant::PiecewiseConstant);
  DiscreteSolution s2 = solve_unconstrained(mesh, dofs, p0);
  REQUIRE(s2.q_repr.size() == mesh.n_triangles());
  std::vector<double> minus_scaled(s2.z.size());
  for (std::size_t i = 0; i < s2.z.size(); ++i)
    minus_scaled[i] = -s2.z[i] / std::sqrt(alpha);
  std::vector<double> means = element_means(mesh, dofs, minus_scaled);
  for (std::size_t t = 0; t < means.size(); ++t)
    CHECK(s2.q_repr[t] == doctest::Approx(means[t]).epsilon(1e-15));
}

TEST_CASE("state error decays at first order in H1") {
  std::vector<double> hs, errs;
  for (int level = 3; level <= 5; ++level) {
    TriMesh mesh = cli::mesh_for_level(level);
    DofMap dofs = interior_dof_map(mesh);
    ManufacturedCase mcase = manufactured_eigen_case(1.0);
    ModelProblem prob = manufactured_problem(1.0);
    DiscreteSolution sol = solve_unconstrained(mesh, dofs, prob);
    hs.push_back(mesh.h);
    errs.push_back(h1_seminorm_error(mesh, dofs, mcase.exact_u, sol.u));
  }
  CHECK(std::abs(fit_rate(hs, errs) - 1.0) <= 0.15);
}

TEST_CASE("iterative and dense paths agree on the level-3 optimality system") {
  TriMesh mesh = cli::mesh_for_level(3);
  DofMap dofs = interior_dof_map(mesh);
  ModelProblem prob = manufactured_problem(1.0);
  BlockSystem sys = assemble_reduced_system(mesh, dofs, prob);
  BlockSolveResult it = solve_sym_indefinite(sys, 1e-12, 100000);
  require_converged(it.report, "iterative");
  std::vector<double> dn = solve_sym_indefinite_dense(sys);
  for (std::size_t i = 0; i < dn.size(); ++i)
    CHECK(std::abs(it.x[i] - dn[i]) <= 1e-8);
}

TEST_CASE("unbounded box reduces to the unconstrained solution") {
  TriMesh mesh = build_uniform_unit_square(8);
  DofMap dofs = interior_dof_map(mesh);
  ModelProblem prob = manufactured_problem(1.0);
  DiscreteSolution ref = solve_unconstrained(mesh, dofs, prob);
  prob.box = BoxBounds{-kUnboundedBox, kUnboundedBox};
  DiscreteSolution sol =
      solve_box_constrained(mesh, dofs, prob, ConstrainedMethod::FixedPoint, 1e-11, 100);
  for (std::size_t i = 0; i < ref.u.size(); ++i) {
    CHECK(std::abs(sol.u[i] - ref.u[i]) <= 1e-8);
    CHECK(std::abs(sol.z[i] - ref.z[i]) <= 1e-8);
  }
}

TEST_CASE("zero data with a feasible box stays at zero") {
  TriMesh mesh = build_uniform_unit_square(8);
  DofMap dofs = interior_dof_map(mesh);
  ModelProblem prob;
  prob.alpha = 1.0;
  prob.u_d = zero_field();
  prob.box = BoxBounds{0.0, 1.0};
  DiscreteSolution sol =
      solve_box_constrained(mesh, dofs, prob, ConstrainedMethod::FixedPoint, 1e-12, 100);
  CHECK(vec_norm(sol.u) <= 1e-12);
  CHECK(vec_norm(sol.z) <= 1e-12);
}

TEST_CASE("constrained solvers: fixed point and newton agree") {
  TriMesh mesh = cli::mesh_for_level(3);
  DofMap dofs = interior_dof_map(mesh);
  ModelProblem prob = manufactured_problem(1.0);
  prob.box = BoxBounds{-0.2, 0.2};
  DiscreteSolution fp =
      solve_box_constrained(mesh, dofs, prob, ConstrainedMethod::FixedPoint, 1e-11, 100);
  DiscreteSolution sn = solve_box_constrained(mesh, dofs, prob,
                                              ConstrainedMethod::SemismoothNewton,
                                              1e-11, 100);
  for (std::size_t i = 0; i < fp.u.size(); ++i) {
    CHECK(std::abs(fp.u[i] - sn.u[i]) <= 1e-8);
    CHECK(std::abs(fp.z[i] - sn.z[i]) <= 1e-8);
  }
  CHECK(fp.outer_iterations <= 50);
  CHECK(sn.outer_iterations <= 20);
}

TEST_CASE("converged fixed point is stable under one more iteration") {
  TriMesh mesh = cli::mesh_for_level(3);
  DofMap dofs = interior_dof_map(mesh);
  const double alpha = 1.0;
  ModelProblem prob = manufactured_problem(alpha);
  prob.box = BoxBounds{-0.2, 0.2};
  const double tol = 1e-11;
  DiscreteSolution sol =
      solve_box_constrained(mesh, dofs, prob, ConstrainedMethod::FixedPoint, tol, 100);

  // re-assemble the clamped term at the converged z and re-solve once
  const double sigma = 1.0 / std::sqrt(alpha);
  CsrMatrix K = assemble_stiffness(mesh, dofs);
  CsrMatrix M = assemble_mass(mesh, dofs);
  std::vector<double> F = assemble_load(mesh, dofs, prob.u_d, 4);
  std::vector<double> N =
      assemble_clamped_term(mesh, dofs, sol.z, alpha, prob.box->lo, prob.box->hi);
  BlockSystem sys;
  sys.B11 = M;
  for (double& v : sys.B11.values) v *= -sigma;
  sys.B12 = K;
  sys.B21 = K;
  sys.B22 = CsrBuilder(dofs.n_dof, dofs.n_dof).build();
  sys.rhs.assign(2 * sol.u.size(), 0.0);
  for (std::size_t i = 0; i < sol.u.size(); ++i) {
    sys.rhs[i] = -sigma * F[i];
    sys.rhs[sol.u.size() + i] = N[i];
  }
  BlockSolveResult next = solve_sym_indefinite(sys, 1e-13, 100000);
  require_converged(next.report, "refix");
  double drift = 0.0;
  for (std::size_t i = 0; i < sol.u.size(); ++i) {
    drift = std::max(drift, std::abs(next.x[i] - sol.u[i]));
    drift = std::max(drift, std::abs(next.x[sol.u.size() + i] - sol.z[i]));
  }
  CHECK(drift <= 10 * tol);
}

TEST_CASE("constrained solve rejects bad configurations") {
  TriMesh mesh = build_uniform_unit_square(4);
  DofMap dofs = interior_dof_map(mesh);
  ModelProblem prob = manufactured_problem(1.0);
  CHECK_THROWS_AS(
      solve_box_constrained(mesh, dofs, prob, ConstrainedMethod::FixedPoint, 1e-10, 50),
      std::invalid_argument);  // no box
  prob.box = BoxBounds{0.5, -0.5};
  CHECK_THROWS_AS(
      solve_box_constrained(mesh, dofs, prob, ConstrainedMethod::FixedPoint, 1e-10, 50),
      std::invalid_argument);  // infeasible
  prob.box = BoxBounds{-1.0, 1.0};
  prob.control_variant = ControlVariant::PiecewiseConstant;
  CHECK_THROWS_AS(
      solve_box_constrained(mesh, dofs, prob, ConstrainedMethod::FixedPoint, 1e-10, 50),
      std::invalid_argument);  // box + P0 combination not offered
}

TEST_CASE("solves succeed across the alpha sweep") {
  TriMesh mesh = build_uniform_unit_square(8);
  DofMap dofs = interior_dof_map(mesh);
  for (double alpha : {1.0, 1e-2, 1e-4}) {
    ModelProblem prob = manufactured_problem(alpha);
    DiscreteSolution sol = solve_unconstrained(mesh, dofs, prob, 1e-10);
    CHECK(sol.solver_residual <= 1e-10);
    prob.box = BoxBounds{-0.2, 0.2};
    DiscreteSolution cs = solve_box_constrained(mesh, dofs, prob,
                                                ConstrainedMethod::FixedPoint, 1e-10, 100);
    CHECK(cs.solver_residual <= 1e-10);
  }
}

TEST_CASE("consistency gap: zero input, variant rejection, quadratic decay") {
  ManufacturedCase mcase = manufactured_eigen_case(1.0);

  TriMesh mesh = build_uniform_unit_square(8);
  DofMap dofs = interior_dof_map(mesh);
  ModelProblem p0 = manufactured_problem(1.0, ControlVariant::PiecewiseConstant);
  std::vector<double> zero(static_cast<std::size_t>(dofs.n_dof), 0.0);
  CHECK(consistency_gap(mesh, dofs, p0, zero) == 0.0);

  ModelProblem full = manufactured_problem(1.0, ControlVariant::Full);
  CHECK_THROWS_AS(consistency_gap(mesh, dofs, full, zero), std::invalid_argument);

  std::vector<double> hs, gaps;
  for (int level = 3; level <= 5; ++level) {
    TriMesh m = cli::mesh_for_level(level);
    DofMap d = interior_dof_map(m);
    std::vector<double> z = nodal_interpolant(m, d, mcase.exact_z);
    hs.push_back(m.h);
    gaps.push_back(consistency_gap(m, d, p0, z));
  }
  CHECK(std::abs(fit_rate(hs, gaps) - 2.0) <= 0.25);
}
