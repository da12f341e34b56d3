#ifndef QBA_LINALG_HPP
#define QBA_LINALG_HPP

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qba/csr.hpp"

namespace qba {

// ---------------------------------------------------------------------------
// dense matrices
// ---------------------------------------------------------------------------

class Dense {
 public:
  Dense() = default;
  Dense(int rows, int cols)
      : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, 0.0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const {
    return a_[static_cast<std::size_t>(i) * cols_ + j];
  }

  static Dense identity(int n);
  Dense transposed() const;
  std::vector<double> matvec(const std::vector<double>& x) const;
  double max_abs() const;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

Dense dense_from_csr(const CsrMatrix& A);
CsrMatrix csr_from_dense(const Dense& A, double drop_tol = 0.0);

// Lower Cholesky in place; returns false if a pivot is not positive.
bool cholesky_factor(Dense& A);
void cholesky_solve_lower(const Dense& L, std::vector<double>& b);
// Forward solve L y = b and transposed solve L^T x = y as separate steps.
void forward_subst_lower(const Dense& L, std::vector<double>& b);
void backward_subst_lower_T(const Dense& L, std::vector<double>& b);

struct LuFactor {
  Dense lu;
  std::vector<int> piv;
};
// Partial-pivoted LU; throws on exact singularity.
LuFactor lu_factor(Dense A);
std::vector<double> lu_solve(const LuFactor& f, std::vector<double> b);

// Bunch-Kaufman LDL^T for dense symmetric indefinite matrices
// (lower variant, partial pivoting).
struct LdltFactor {
  Dense a;
  std::vector<int> ipiv;  // >= 0: 1x1 pivot row; < 0: 2x2 block, row = -ipiv-1
};
LdltFactor ldlt_factor(Dense A);
std::vector<double> ldlt_solve(const LdltFactor& f, std::vector<double> b);

// Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations;
// optionally accumulates eigenvectors as columns of *eigvecs.
std::vector<double> jacobi_eigenvalues(Dense A, Dense* eigvecs = nullptr);

// ---------------------------------------------------------------------------
// banded Cholesky (SPD, small bandwidth; used for stiffness preconditioning
// and repeated projection solves)
// ---------------------------------------------------------------------------

class BandCholesky {
 public:
  static BandCholesky factor(const CsrMatrix& A);
  void solve(double* b) const;
  void solve(std::vector<double>& b) const { solve(b.data()); }
  int n() const { return n_; }
  int bandwidth() const { return bw_; }

 private:
  int n_ = 0, bw_ = 0;
  std::vector<double> f_;  // f_[i*(bw+1)+d] = L(i, i-d)
};

// ---------------------------------------------------------------------------
// iterative solvers
// ---------------------------------------------------------------------------

struct LinearOperator {
  std::int32_t n = 0;
  std::function<void(const double*, double*)> apply;
};

enum class SolveStatus { Converged, MaxIterations, IndefiniteDetected, Breakdown };

struct SolveReport {
  SolveStatus status = SolveStatus::Converged;
  int iterations = 0;
  double residual = 0.0;  // final true relative residual ||b-Ax||/||b||
};

const char* to_string(SolveStatus s);

struct SolverError : std::runtime_error {
  SolveReport report;
  SolverError(const std::string& msg, SolveReport r)
      : std::runtime_error(msg), report(r) {}
};
void require_converged(const SolveReport& r, const char* what);

// Conjugate gradients for SPD operators; the returned residual is
// re-verified by an explicit matvec. Detects negative curvature.
SolveReport cg_solve(const LinearOperator& A, const std::vector<double>& b,
                     std::vector<double>& x, double tol, int max_iter);
std::vector<double> solve_spd(const CsrMatrix& A, const std::vector<double>& b,
                              double tol, int max_iter);

// MINRES for symmetric (possibly indefinite) operators with an optional SPD
// preconditioner. Convergence is declared on the explicitly recomputed true
// residual; the preconditioned recurrence only steers the iteration.
SolveReport minres_solve(const LinearOperator& A, const std::vector<double>& b,
                         std::vector<double>& x, double tol, int max_iter,
                         const std::function<void(const double*, double*)>* precond = nullptr);

// ---------------------------------------------------------------------------
// 2x2 block systems (reduced optimality systems)
// ---------------------------------------------------------------------------

struct BlockSystem {
  CsrMatrix B11, B12, B21, B22;
  std::vector<double> rhs;

  std::int32_t n1() const { return B11.n_rows; }
  std::int32_t n2() const { return B22.n_rows; }
  std::int32_t size() const { return n1() + n2(); }

  void apply(const double* x, double* y) const;
  LinearOperator as_operator() const;
  Dense to_dense() const;
  // Verifies block dimensions, B12 = B21^T and symmetry of the diagonal
  // blocks within tol * max|entry|; throws std::invalid_argument otherwise.
  void check_symmetric(double tol = 1e-12) const;
};

struct BlockSolveResult {
  std::vector<double> x;
  SolveReport report;
};

// Iterative (MINRES) solution of a symmetric block system. The optional
// preconditioner must be SPD on the full vector.
BlockSolveResult solve_sym_indefinite(const BlockSystem& sys, double tol, int max_iter,
                                      const std::function<void(const double*, double*)>* precond = nullptr);
// Dense Bunch-Kaufman path (intended for size() <= 2000 cross-checks).
std::vector<double> solve_sym_indefinite_dense(const BlockSystem& sys);

// ---------------------------------------------------------------------------
// inf-sup constants and extremal eigenvalues
// ---------------------------------------------------------------------------

// inf over test phi of sup over trial v of  v^T B phi / (|v|_Gtrial |phi|_Gtest)
//  = sqrt(lambda_min(Gtest^-1 B^T Gtrial^-1 B)), via Cholesky whitening.
double inf_sup_constant(const Dense& B, const Dense& G_trial, const Dense& G_test);

// lambda_max of B_gram^{-1} A (A symmetric, B_gram SPD) by power iteration
// on the whitened operator, deterministic seed.
double generalized_eig_max(const CsrMatrix& A, const CsrMatrix& B_gram,
                           double rel_tol = 1e-10, int max_iter = 50000);

// Operator form: apply_A and apply_B are matvecs, solve_B applies B^{-1}.
double generalized_eig_max_op(const LinearOperator& apply_A,
                              const LinearOperator& apply_B,
                              const std::function<void(double*)>& solve_B,
                              double rel_tol = 1e-10, int max_iter = 50000);

}  // namespace qba

#endif
