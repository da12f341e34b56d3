#include "qba/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "qba/kernels.hpp"

namespace qba {

namespace {
using kernels::axpy;
using kernels::dot;
using kernels::nrm2;
using kernels::scal;
using kernels::waxpby;
}  // namespace

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Dense Dense::identity(int n) {
  Dense I(n, n);
  for (int i = 0; i < n; ++i) I(i, i) = 1.0;
  return I;
}

Dense Dense::transposed() const {
  Dense T(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) T(j, i) = (*this)(i, j);
  return T;
}

std::vector<double> Dense::matvec(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != cols_)
    throw std::invalid_argument("Dense::matvec: size mismatch");
  std::vector<double> y(rows_, 0.0);
  for (int i = 0; i < rows_; ++i)
    y[i] = dot(&a_[static_cast<std::size_t>(i) * cols_], x.data(), cols_);
  return y;
}

double Dense::max_abs() const {
  double m = 0.0;
  for (double v : a_) m = std::max(m, std::abs(v));
  return m;
}

Dense dense_from_csr(const CsrMatrix& A) {
  Dense D(A.n_rows, A.n_cols);
  for (std::int32_t r = 0; r < A.n_rows; ++r)
    for (std::int32_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
      D(r, A.col_idx[k]) = A.values[k];
  return D;
}

CsrMatrix csr_from_dense(const Dense& A, double drop_tol) {
  CsrBuilder builder(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      if (std::abs(A(i, j)) > drop_tol) builder.add(i, j, A(i, j));
  return builder.build();
}

bool cholesky_factor(Dense& A) {
  const int n = A.rows();
  for (int j = 0; j < n; ++j) {
    double d = A(j, j);
    for (int k = 0; k < j; ++k) d -= A(j, k) * A(j, k);
    if (!(d > 0.0)) return false;
    d = std::sqrt(d);
    A(j, j) = d;
    for (int i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (int k = 0; k < j; ++k) s -= A(i, k) * A(j, k);
      A(i, j) = s / d;
    }
    for (int k = j + 1; k < n; ++k) A(j, k) = 0.0;
  }
  return true;
}

void forward_subst_lower(const Dense& L, std::vector<double>& b) {
  const int n = L.rows();
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= L(i, k) * b[k];
    b[i] = s / L(i, i);
  }
}

void backward_subst_lower_T(const Dense& L, std::vector<double>& b) {
  const int n = L.rows();
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= L(k, i) * b[k];
    b[i] = s / L(i, i);
  }
}

void cholesky_solve_lower(const Dense& L, std::vector<double>& b) {
  forward_subst_lower(L, b);
  backward_subst_lower_T(L, b);
}

LuFactor lu_factor(Dense A) {
  const int n = A.rows();
  LuFactor f;
  f.piv.resize(n);
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(A(k, k));
    for (int i = k + 1; i < n; ++i) {
      if (std::abs(A(i, k)) > best) {
        best = std::abs(A(i, k));
        p = i;
      }
    }
    if (best == 0.0) throw std::runtime_error("lu_factor: singular matrix");
    f.piv[k] = p;
    if (p != k)
      for (int j = 0; j < n; ++j) std::swap(A(k, j), A(p, j));
    const double d = A(k, k);
    for (int i = k + 1; i < n; ++i) {
      double l = A(i, k) / d;
      A(i, k) = l;
      if (l != 0.0)
        for (int j = k + 1; j < n; ++j) A(i, j) -= l * A(k, j);
    }
  }
  f.lu = std::move(A);
  return f;
}

std::vector<double> lu_solve(const LuFactor& f, std::vector<double> b) {
  const int n = f.lu.rows();
  // the factorization swaps whole rows, so all interchanges apply to b first
  for (int k = 0; k < n; ++k)
    if (f.piv[k] != k) std::swap(b[k], b[f.piv[k]]);
  for (int k = 0; k < n; ++k)
    for (int i = k + 1; i < n; ++i) b[i] -= f.lu(i, k) * b[k];
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= f.lu(i, j) * b[j];
    b[i] = s / f.lu(i, i);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Bunch-Kaufman LDL^T (lower, partial pivoting; mirrors LAPACK dsytf2/dsytrs)
// ---------------------------------------------------------------------------

namespace {

void sym_swap_lower(Dense& A, int kk, int kp, int k, int kstep) {
  const int n = A.rows();
  for (int i = kp + 1; i < n; ++i) std::swap(A(i, kk), A(i, kp));
  for (int j = kk + 1; j < kp; ++j) std::swap(A(j, kk), A(kp, j));
  std::swap(A(kk, kk), A(kp, kp));
  if (kstep == 2) std::swap(A(k + 1, k), A(kp, k));
}

}  // namespace

LdltFactor ldlt_factor(Dense A) {
  const int n = A.rows();
  const double pivot_alpha = (1.0 + std::sqrt(17.0)) / 8.0;
  LdltFactor f;
  f.ipiv.assign(n, 0);

  int k = 0;
  while (k < n) {
    int kstep = 1;
    int kp = k;
    const double absakk = std::abs(A(k, k));
    int imax = -1;
    double colmax = 0.0;
    for (int i = k + 1; i < n; ++i) {
      if (std::abs(A(i, k)) > colmax) {
        colmax = std::abs(A(i, k));
        imax = i;
      }
    }
    if (std::max(absakk, colmax) == 0.0)
      throw std::runtime_error("ldlt_factor: singular matrix");

    if (absakk >= pivot_alpha * colmax) {
      // 1x1 pivot at k
    } else {
      double rowmax = 0.0;
      for (int j = k; j < imax; ++j) rowmax = std::max(rowmax, std::abs(A(imax, j)));
      for (int i = imax + 1; i < n; ++i) rowmax = std::max(rowmax, std::abs(A(i, imax)));
      if (absakk * rowmax >= pivot_alpha * colmax * colmax) {
        // 1x1 pivot at k
      } else if (std::abs(A(imax, imax)) >= pivot_alpha * rowmax) {
        kp = imax;  // 1x1 pivot, swap k <-> imax
      } else {
        kp = imax;  // 2x2 pivot, swap k+1 <-> imax
        kstep = 2;
      }
    }

    const int kk = k + kstep - 1;
    if (kp != kk) sym_swap_lower(A, kk, kp, k, kstep);

    if (kstep == 1) {
      const double d = A(k, k);
      for (int j = k + 1; j < n; ++j) {
        const double mult = A(j, k) / d;
        if (mult != 0.0)
          for (int i = j; i < n; ++i) A(i, j) -= A(i, k) * mult;
      }
      for (int i = k + 1; i < n; ++i) A(i, k) /= d;
      f.ipiv[k] = kp;
      k += 1;
    } else {
      const double d21 = A(k + 1, k);
      const double d11 = A(k + 1, k + 1) / d21;
      const double d22 = A(k, k) / d21;
      const double t = 1.0 / (d11 * d22 - 1.0);
      const double d21t = t / d21;
      for (int j = k + 2; j < n; ++j) {
        const double wk = d21t * (d11 * A(j, k) - A(j, k + 1));
        const double wkp1 = d21t * (d22 * A(j, k + 1) - A(j, k));
        for (int i = j; i < n; ++i)
          A(i, j) -= A(i, k) * wk + A(i, k + 1) * wkp1;
        A(j, k) = wk;
        A(j, k + 1) = wkp1;
      }
      f.ipiv[k] = -kp - 1;
      f.ipiv[k + 1] = -kp - 1;
      k += 2;
    }
  }
  f.a = std::move(A);
  return f;
}

std::vector<double> ldlt_solve(const LdltFactor& f, std::vector<double> b) {
  const Dense& A = f.a;
  const int n = A.rows();

  // forward: b := D^{-1} L^{-1} P b  (permutations interleaved as in dsytrs)
  int k = 0;
  while (k < n) {
    if (f.ipiv[k] >= 0) {
      const int kp = f.ipiv[k];
      if (kp != k) std::swap(b[k], b[kp]);
      for (int i = k + 1; i < n; ++i) b[i] -= A(i, k) * b[k];
      b[k] /= A(k, k);
      k += 1;
    } else {
      const int kp = -f.ipiv[k] - 1;
      if (kp != k + 1) std::swap(b[k + 1], b[kp]);
      for (int i = k + 2; i < n; ++i)
        b[i] -= A(i, k) * b[k] + A(i, k + 1) * b[k + 1];
      const double akm1k = A(k + 1, k);
      const double akm1 = A(k, k) / akm1k;
      const double ak = A(k + 1, k + 1) / akm1k;
      const double denom = akm1 * ak - 1.0;
      const double bkm1 = b[k] / akm1k;
      const double bk = b[k + 1] / akm1k;
      b[k] = (ak * bkm1 - bk) / denom;
      b[k + 1] = (akm1 * bk - bkm1) / denom;
      k += 2;
    }
  }

  // backward: b := P^T L^{-T} b
  k = n - 1;
  while (k >= 0) {
    if (f.ipiv[k] >= 0) {
      double s = b[k];
      for (int i = k + 1; i < n; ++i) s -= A(i, k) * b[i];
      b[k] = s;
      const int kp = f.ipiv[k];
      if (kp != k) std::swap(b[k], b[kp]);
      k -= 1;
    } else {
      // 2x2 block occupies rows (k-1, k)
      double s1 = b[k];
      double s0 = b[k - 1];
      for (int i = k + 1; i < n; ++i) {
        s1 -= A(i, k) * b[i];
        s0 -= A(i, k - 1) * b[i];
      }
      b[k] = s1;
      b[k - 1] = s0;
      const int kp = -f.ipiv[k] - 1;
      if (kp != k) std::swap(b[k], b[kp]);
      k -= 2;
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Jacobi eigenvalues
// ---------------------------------------------------------------------------

std::vector<double> jacobi_eigenvalues(Dense A, Dense* eigvecs) {
  const int n = A.rows();
  if (n != A.cols()) throw std::invalid_argument("jacobi: matrix not square");
  Dense V = Dense::identity(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += A(i, j) * A(i, j);
    return std::sqrt(2.0 * s);
  };
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(A(i, j)));
  const double stop = std::max(1e-300, 1e-15 * scale * n);

  for (int sweep = 0; sweep < 100 && off_norm() > stop; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = A(i, p), aiq = A(i, q);
          A(i, p) = c * aip - s * aiq;
          A(i, q) = s * aip + c * aiq;
        }
        for (int j = 0; j < n; ++j) {
          const double apj = A(p, j), aqj = A(q, j);
          A(p, j) = c * apj - s * aqj;
          A(q, j) = s * apj + c * aqj;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = V(i, p), viq = V(i, q);
          V(i, p) = c * vip - s * viq;
          V(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return A(a, a) < A(b, b); });
  std::vector<double> evals(n);
  for (int i = 0; i < n; ++i) evals[i] = A(order[i], order[i]);
  if (eigvecs) {
    *eigvecs = Dense(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) (*eigvecs)(i, j) = V(i, order[j]);
  }
  return evals;
}

// ---------------------------------------------------------------------------
// BandCholesky
// ---------------------------------------------------------------------------

BandCholesky BandCholesky::factor(const CsrMatrix& A) {
  if (A.n_rows != A.n_cols) throw std::invalid_argument("BandCholesky: not square");
  BandCholesky bc;
  bc.n_ = A.n_rows;
  int bw = 0;
  for (std::int32_t r = 0; r < A.n_rows; ++r)
    for (std::int32_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
      bw = std::max(bw, std::abs(r - A.col_idx[k]));
  bc.bw_ = bw;
  const int stride = bw + 1;
  bc.f_.assign(static_cast<std::size_t>(bc.n_) * stride, 0.0);
  auto at = [&](int i, int j) -> double& {
    return bc.f_[static_cast<std::size_t>(i) * stride + (i - j)];
  };
  for (std::int32_t r = 0; r < A.n_rows; ++r)
    for (std::int32_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
      if (A.col_idx[k] <= r) at(r, A.col_idx[k]) = A.values[k];

  for (int i = 0; i < bc.n_; ++i) {
    const int jmin = std::max(0, i - bw);
    for (int j = jmin; j < i; ++j) {
      double s = at(i, j);
      for (int k = jmin; k < j; ++k) s -= at(i, k) * at(j, k);
      at(i, j) = s / at(j, j);
    }
    double d = at(i, i);
    for (int k = jmin; k < i; ++k) d -= at(i, k) * at(i, k);
    if (!(d > 0.0)) throw std::runtime_error("BandCholesky: matrix not SPD");
    at(i, i) = std::sqrt(d);
  }
  return bc;
}

void BandCholesky::solve(double* b) const {
  const int stride = bw_ + 1;
  auto at = [&](int i, int j) {
    return f_[static_cast<std::size_t>(i) * stride + (i - j)];
  };
  for (int i = 0; i < n_; ++i) {
    double s = b[i];
    const int kmin = std::max(0, i - bw_);
    for (int k = kmin; k < i; ++k) s -= at(i, k) * b[k];
    b[i] = s / at(i, i);
  }
  for (int i = n_ - 1; i >= 0; --i) {
    double s = b[i];
    const int kmax = std::min(n_ - 1, i + bw_);
    for (int k = i + 1; k <= kmax; ++k) s -= at(k, i) * b[k];
    b[i] = s / at(i, i);
  }
}

// ---------------------------------------------------------------------------
// iterative solvers
// ---------------------------------------------------------------------------

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max iterations reached";
    case SolveStatus::IndefiniteDetected: return "negative curvature detected";
    case SolveStatus::Breakdown: return "breakdown";
  }
  return "unknown";
}

void require_converged(const SolveReport& r, const char* what) {
  if (r.status != SolveStatus::Converged) {
    std::ostringstream os;
    os << what << ": " << to_string(r.status) << " after " << r.iterations
       << " iterations, achieved residual " << r.residual;
    throw SolverError(os.str(), r);
  }
}

namespace {

double true_residual(const LinearOperator& A, const std::vector<double>& b,
                     const std::vector<double>& x, double bnorm) {
  std::vector<double> r(b.size());
  A.apply(x.data(), r.data());
  waxpby(1.0, b.data(), -1.0, r.data(), r.data(), b.size());
  return nrm2(r.data(), r.size()) / bnorm;
}

}  // namespace

SolveReport cg_solve(const LinearOperator& A, const std::vector<double>& b,
                     std::vector<double>& x, double tol, int max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("cg_solve: tol must be positive");
  const std::size_t n = b.size();
  x.assign(n, 0.0);
  SolveReport rep;
  const double bnorm = nrm2(b.data(), n);
  if (bnorm == 0.0) return rep;

  std::vector<double> r = b, p = b, Ap(n);
  double rr = dot(r.data(), r.data(), n);
  int it = 0;
  while (it < max_iter) {
    A.apply(p.data(), Ap.data());
    const double pAp = dot(p.data(), Ap.data(), n);
    if (pAp <= 0.0) {
      rep.status = SolveStatus::IndefiniteDetected;
      rep.iterations = it;
      rep.residual = std::sqrt(rr) / bnorm;
      return rep;
    }
    const double step = rr / pAp;
    axpy(step, p.data(), x.data(), n);
    axpy(-step, Ap.data(), r.data(), n);
    const double rr_new = dot(r.data(), r.data(), n);
    ++it;
    if (std::sqrt(rr_new) <= tol * bnorm) {
      // guard against accumulated drift in the recurrence
      const double true_res = true_residual(A, b, x, bnorm);
      if (true_res <= tol) {
        rep.iterations = it;
        rep.residual = true_res;
        return rep;
      }
      r = b;
      std::vector<double> tmp(n);
      A.apply(x.data(), tmp.data());
      axpy(-1.0, tmp.data(), r.data(), n);
      rr = dot(r.data(), r.data(), n);
      p = r;
      continue;
    }
    waxpby(1.0, r.data(), rr_new / rr, p.data(), p.data(), n);
    rr = rr_new;
  }
  rep.status = SolveStatus::MaxIterations;
  rep.iterations = it;
  rep.residual = true_residual(A, b, x, bnorm);
  return rep;
}

std::vector<double> solve_spd(const CsrMatrix& A, const std::vector<double>& b,
                              double tol, int max_iter) {
  if (A.n_rows != static_cast<std::int32_t>(b.size()))
    throw std::invalid_argument("solve_spd: dimension mismatch");
  LinearOperator op{A.n_rows, [&A](const double* x, double* y) { A.matvec(x, y); }};
  std::vector<double> x;
  SolveReport rep = cg_solve(op, b, x, tol, max_iter);
  require_converged(rep, "solve_spd");
  return x;
}

namespace {

// One preconditioned MINRES cycle (Paige & Saunders recurrence). Returns the
// recurrence's residual estimate; x is updated in place from its previous value.
int minres_cycle(const LinearOperator& A, const std::vector<double>& b,
                 std::vector<double>& x, double tol, int max_iter,
                 const std::function<void(const double*, double*)>* precond,
                 double* est_residual) {
  const std::size_t n = b.size();
  std::vector<double> r1(n), y(n);
  A.apply(x.data(), r1.data());
  waxpby(1.0, b.data(), -1.0, r1.data(), r1.data(), n);
  if (precond)
    (*precond)(r1.data(), y.data());
  else
    y = r1;
  double beta1 = dot(r1.data(), y.data(), n);
  if (beta1 < 0.0) throw std::runtime_error("minres: preconditioner not SPD");
  if (beta1 == 0.0) {
    *est_residual = 0.0;
    return 0;
  }
  beta1 = std::sqrt(beta1);

  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  std::vector<double> r2 = r1, w(n, 0.0), w2(n, 0.0), w1(n, 0.0), v(n), tmp(n);

  int it = 0;
  while (it < max_iter) {
    ++it;
    waxpby(1.0 / beta, y.data(), 0.0, y.data(), v.data(), n);
    A.apply(v.data(), tmp.data());
    if (it >= 2) axpy(-beta / oldb, r1.data(), tmp.data(), n);
    const double alfa = dot(v.data(), tmp.data(), n);
    axpy(-alfa / beta, r2.data(), tmp.data(), n);
    r1 = r2;
    r2 = tmp;
    if (precond)
      (*precond)(r2.data(), y.data());
    else
      y = r2;
    oldb = beta;
    beta = dot(r2.data(), y.data(), n);
    if (beta < 0.0) throw std::runtime_error("minres: preconditioner not SPD");
    beta = std::sqrt(beta);

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::sqrt(gbar * gbar + beta * beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    w1 = w2;
    w2 = w;
    for (std::size_t i = 0; i < n; ++i)
      w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
    axpy(phi, w.data(), x.data(), n);

    if (phibar <= tol * beta1) break;
    if (beta <= 1e-300) break;  // lucky breakdown: exact solution reached
  }
  *est_residual = phibar;
  return it;
}

}  // namespace

SolveReport minres_solve(const LinearOperator& A, const std::vector<double>& b,
                         std::vector<double>& x, double tol, int max_iter,
                         const std::function<void(const double*, double*)>* precond) {
  const std::size_t n = b.size();
  x.assign(n, 0.0);
  SolveReport rep;
  const double bnorm = nrm2(b.data(), n);
  if (bnorm == 0.0) return rep;

  // The recurrence is restarted on the explicitly computed residual until the
  // true tolerance is met (the preconditioned estimate only steers it). Each
  // cycle gets a bounded budget; stagnation across cycles means the roundoff
  // floor has been reached and is reported as non-convergence.
  int iters_left = max_iter;
  int total_it = 0;
  double target = tol;
  double prev_res = std::numeric_limits<double>::infinity();
  for (int cycle = 0; cycle < 8 && iters_left > 0; ++cycle) {
    const int budget =
        std::min(iters_left, std::max(300, 2 * static_cast<int>(n)));
    double est = 0.0;
    const int used = minres_cycle(A, b, x, target, budget, precond, &est);
    total_it += used;
    iters_left -= used;
    rep.residual = true_residual(A, b, x, bnorm);
    rep.iterations = total_it;
    if (rep.residual <= tol) {
      rep.status = SolveStatus::Converged;
      return rep;
    }
    if (used == 0 || rep.residual > 0.9 * prev_res) break;  // floor reached
    prev_res = rep.residual;
    target = std::max(0.1 * target, 0.1 * tol * (tol / rep.residual));
  }
  rep.status = SolveStatus::MaxIterations;
  return rep;
}

// ---------------------------------------------------------------------------
// BlockSystem
// ---------------------------------------------------------------------------

void BlockSystem::apply(const double* x, double* y) const {
  const std::int32_t m = n1();
  B11.matvec(x, y);
  B12.matvec_add(1.0, x + m, y);
  B21.matvec(x, y + m);
  B22.matvec_add(1.0, x + m, y + m);
}

LinearOperator BlockSystem::as_operator() const {
  return {size(), [this](const double* x, double* y) { apply(x, y); }};
}

Dense BlockSystem::to_dense() const {
  const std::int32_t m = n1(), k = n2();
  Dense D(m + k, m + k);
  auto put = [&](const CsrMatrix& A, int roff, int coff) {
    for (std::int32_t r = 0; r < A.n_rows; ++r)
      for (std::int32_t p = A.row_ptr[r]; p < A.row_ptr[r + 1]; ++p)
        D(r + roff, A.col_idx[p] + coff) = A.values[p];
  };
  put(B11, 0, 0);
  put(B12, 0, m);
  put(B21, m, 0);
  put(B22, m, m);
  return D;
}

void BlockSystem::check_symmetric(double tol) const {
  if (B11.n_rows != B11.n_cols || B22.n_rows != B22.n_cols ||
      B12.n_rows != B11.n_rows || B12.n_cols != B22.n_cols ||
      B21.n_rows != B22.n_rows || B21.n_cols != B11.n_cols)
    throw std::invalid_argument("BlockSystem: inconsistent block dimensions");
  if (rhs.size() != static_cast<std::size_t>(size()))
    throw std::invalid_argument("BlockSystem: rhs length mismatch");
  const double scale = std::max(
      {B11.max_abs(), B12.max_abs(), B21.max_abs(), B22.max_abs(), 1e-300});
  if (B11.symmetry_defect() > tol * scale || B22.symmetry_defect() > tol * scale)
    throw std::invalid_argument("BlockSystem: diagonal block not symmetric");
  const CsrMatrix diff = csr_add(1.0, B12, -1.0, B21.transposed());
  if (diff.max_abs() > tol * scale)
    throw std::invalid_argument("BlockSystem: off-diagonal blocks not transposes");
}

BlockSolveResult solve_sym_indefinite(const BlockSystem& sys, double tol, int max_iter,
                                      const std::function<void(const double*, double*)>* precond) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_sym_indefinite: tol must be positive");
  sys.check_symmetric();
  BlockSolveResult out;
  out.report = minres_solve(sys.as_operator(), sys.rhs, out.x, tol, max_iter, precond);
  return out;
}

std::vector<double> solve_sym_indefinite_dense(const BlockSystem& sys) {
  sys.check_symmetric();
  LdltFactor f = ldlt_factor(sys.to_dense());
  return ldlt_solve(f, sys.rhs);
}

// ---------------------------------------------------------------------------
// inf-sup constant and extremal eigenvalues
// ---------------------------------------------------------------------------

double inf_sup_constant(const Dense& B, const Dense& G_trial, const Dense& G_test) {
  const int m = B.rows(), k = B.cols();
  if (G_trial.rows() != m || G_trial.cols() != m || G_test.rows() != k ||
      G_test.cols() != k)
    throw std::invalid_argument("inf_sup_constant: dimension mismatch");
  if (m > 5000 || k > 5000)
    throw std::invalid_argument("inf_sup_constant: dense size limit exceeded");
  Dense Ltr = G_trial, Lte = G_test;
  if (!cholesky_factor(Ltr)) throw std::invalid_argument("inf_sup_constant: trial Gram not SPD");
  if (!cholesky_factor(Lte)) throw std::invalid_argument("inf_sup_constant: test Gram not SPD");

  // S = Ltr^{-1} B Lte^{-T}: forward solves on columns, then on rows.
  Dense S(m, k);
  std::vector<double> col(m);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < m; ++i) col[i] = B(i, j);
    forward_subst_lower(Ltr, col);
    for (int i = 0; i < m; ++i) S(i, j) = col[i];
  }
  std::vector<double> row(k);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < k; ++j) row[j] = S(i, j);
    forward_subst_lower(Lte, row);
    for (int j = 0; j < k; ++j) S(i, j) = row[j];
  }

  Dense StS(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = a; b < k; ++b) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += S(i, a) * S(i, b);
      StS(a, b) = s;
      StS(b, a) = s;
    }
  std::vector<double> evals = jacobi_eigenvalues(std::move(StS));
  return std::sqrt(std::max(0.0, evals.front()));
}

namespace {

// B-orthogonal power iteration on B^{-1}A + shift*I; returns the Rayleigh
// quotient of the dominant eigenvalue (of largest magnitude).
double shifted_power_iteration(const LinearOperator& apply_A,
                               const LinearOperator& apply_B,
                               const std::function<void(double*)>& solve_B,
                               double shift, double rel_tol, int max_iter) {
  const std::size_t n = static_cast<std::size_t>(apply_A.n);
  std::mt19937 rng(42);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(n), y(n), Bx(n);
  for (double& v : x) v = gauss(rng);
  apply_B.apply(x.data(), Bx.data());
  double xBx = dot(x.data(), Bx.data(), n);
  scal(1.0 / std::sqrt(xBx), x.data(), n);

  double lam_old = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    apply_A.apply(x.data(), y.data());
    const double lam = dot(x.data(), y.data(), n) + shift;  // x is B-normalized
    solve_B(y.data());
    axpy(shift, x.data(), y.data(), n);  // y := B^{-1}A x + shift x
    apply_B.apply(y.data(), Bx.data());
    const double yBy = dot(y.data(), Bx.data(), n);
    if (!(yBy > 0.0)) throw std::runtime_error("generalized_eig_max: breakdown");
    waxpby(1.0 / std::sqrt(yBy), y.data(), 0.0, y.data(), x.data(), n);
    if (it > 0 && std::abs(lam - lam_old) <= rel_tol * std::max(std::abs(lam), 1e-300))
      return lam;
    lam_old = lam;
  }
  throw std::runtime_error("generalized_eig_max: power iteration did not converge");
}

}  // namespace

double generalized_eig_max_op(const LinearOperator& apply_A,
                              const LinearOperator& apply_B,
                              const std::function<void(double*)>& solve_B,
                              double rel_tol, int max_iter) {
  const double dominant =
      shifted_power_iteration(apply_A, apply_B, solve_B, 0.0, rel_tol, max_iter);
  if (dominant >= 0.0) return dominant;
  // The dominant eigenvalue is negative; shift so that lambda_max dominates.
  const double shift = 2.0 * std::abs(dominant);
  return shifted_power_iteration(apply_A, apply_B, solve_B, shift, rel_tol, max_iter) -
         shift;
}

double generalized_eig_max(const CsrMatrix& A, const CsrMatrix& B_gram,
                           double rel_tol, int max_iter) {
  if (A.n_rows != B_gram.n_rows || A.n_cols != B_gram.n_cols)
    throw std::invalid_argument("generalized_eig_max: dimension mismatch");
  BandCholesky chol = BandCholesky::factor(B_gram);
  LinearOperator opA{A.n_rows, [&A](const double* x, double* y) { A.matvec(x, y); }};
  LinearOperator opB{B_gram.n_rows,
                     [&B_gram](const double* x, double* y) { B_gram.matvec(x, y); }};
  auto solveB = [&chol](double* b) { chol.solve(b); };
  return generalized_eig_max_op(opA, opB, solveB, rel_tol, max_iter);
}

}  // namespace qba
