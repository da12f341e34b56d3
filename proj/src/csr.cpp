#include "qba/csr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qba/kernels.hpp"

namespace qba {

void CsrMatrix::matvec(const double* x, double* y) const {
  kernels::csr_spmv(static_cast<std::size_t>(n_rows), row_ptr.data(),
                    col_idx.data(), values.data(), x, y);
}

std::vector<double> CsrMatrix::matvec(const std::vector<double>& x) const {
  std::vector<double> y(static_cast<std::size_t>(n_rows));
  matvec(x.data(), y.data());
  return y;
}

void CsrMatrix::matvec_add(double s, const double* x, double* y) const {
  if (s == 1.0) {
    kernels::csr_spmv_add(static_cast<std::size_t>(n_rows), row_ptr.data(),
                          col_idx.data(), values.data(), x, y);
    return;
  }
  for (std::int32_t r = 0; r < n_rows; ++r) {
    double acc = 0.0;
    for (std::int32_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      acc += values[k] * x[col_idx[k]];
    y[r] += s * acc;
  }
}

CsrMatrix CsrMatrix::transposed() const {
  CsrMatrix T;
  T.n_rows = n_cols;
  T.n_cols = n_rows;
  T.row_ptr.assign(static_cast<std::size_t>(n_cols) + 1, 0);
  for (std::int32_t c : col_idx) ++T.row_ptr[c + 1];
  for (std::int32_t i = 0; i < n_cols; ++i) T.row_ptr[i + 1] += T.row_ptr[i];
  T.col_idx.resize(nnz());
  T.values.resize(nnz());
  std::vector<std::int32_t> next(T.row_ptr.begin(), T.row_ptr.end() - 1);
  for (std::int32_t r = 0; r < n_rows; ++r) {
    for (std::int32_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      std::int32_t pos = next[col_idx[k]]++;
      T.col_idx[pos] = r;
      T.values[pos] = values[k];
    }
  }
  return T;
}

std::vector<std::vector<double>> CsrMatrix::to_dense() const {
  std::vector<std::vector<double>> D(
      static_cast<std::size_t>(n_rows),
      std::vector<double>(static_cast<std::size_t>(n_cols), 0.0));
  for (std::int32_t r = 0; r < n_rows; ++r)
    for (std::int32_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      D[r][col_idx[k]] = values[k];
  return D;
}

double CsrMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double CsrMatrix::symmetry_defect() const {
  if (n_rows != n_cols) throw std::invalid_argument("symmetry_defect: not square");
  CsrMatrix T = transposed();
  double defect = 0.0;
  for (std::int32_t r = 0; r < n_rows; ++r) {
    std::int32_t ka = row_ptr[r], kb = T.row_ptr[r];
    const std::int32_t ea = row_ptr[r + 1], eb = T.row_ptr[r + 1];
    while (ka < ea || kb < eb) {
      std::int32_t ca = ka < ea ? col_idx[ka] : n_cols;
      std::int32_t cb = kb < eb ? T.col_idx[kb] : n_cols;
      if (ca == cb) {
        defect = std::max(defect, std::abs(values[ka] - T.values[kb]));
        ++ka, ++kb;
      } else if (ca < cb) {
        defect = std::max(defect, std::abs(values[ka]));
        ++ka;
      } else {
        defect = std::max(defect, std::abs(T.values[kb]));
        ++kb;
      }
    }
  }
  return defect;
}

void CsrMatrix::validate() const {
  if (row_ptr.size() != static_cast<std::size_t>(n_rows) + 1)
    throw std::logic_error("csr: row_ptr size mismatch");
  if (row_ptr.front() != 0 ||
      row_ptr.back() != static_cast<std::int32_t>(values.size()))
    throw std::logic_error("csr: row_ptr endpoints invalid");
  for (std::int32_t r = 0; r < n_rows; ++r) {
    if (row_ptr[r] > row_ptr[r + 1]) throw std::logic_error("csr: row_ptr not monotone");
    for (std::int32_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      if (col_idx[k] < 0 || col_idx[k] >= n_cols)
        throw std::logic_error("csr: column out of range");
      if (k > row_ptr[r] && col_idx[k] <= col_idx[k - 1])
        throw std::logic_error("csr: columns not strictly increasing");
    }
  }
}

CsrMatrix CsrBuilder::build() const {
  CsrMatrix A;
  A.n_rows = n_rows_;
  A.n_cols = n_cols_;
  A.row_ptr.reserve(static_cast<std::size_t>(n_rows_) + 1);
  A.row_ptr.push_back(0);
  for (const auto& row : rows_) {
    for (const auto& [c, v] : row) {
      A.col_idx.push_back(c);
      A.values.push_back(v);
    }
    A.row_ptr.push_back(static_cast<std::int32_t>(A.values.size()));
  }
  return A;
}

CsrMatrix csr_add(double a, const CsrMatrix& A, double b, const CsrMatrix& B) {
  if (A.n_rows != B.n_rows || A.n_cols != B.n_cols)
    throw std::invalid_argument("csr_add: dimension mismatch");
  CsrBuilder out(A.n_rows, A.n_cols);
  for (std::int32_t r = 0; r < A.n_rows; ++r) {
    for (std::int32_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
      out.add(r, A.col_idx[k], a * A.values[k]);
    for (std::int32_t k = B.row_ptr[r]; k < B.row_ptr[r + 1]; ++k)
      out.add(r, B.col_idx[k], b * B.values[k]);
  }
  return out.build();
}

std::string to_matrix_market(const CsrMatrix& A) {
  std::ostringstream os;
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << A.n_rows << " " << A.n_cols << " " << A.nnz() << "\n";
  os.precision(17);
  for (std::int32_t r = 0; r < A.n_rows; ++r)
    for (std::int32_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k)
      os << r + 1 << " " << A.col_idx[k] + 1 << " " << A.values[k] << "\n";
  return os.str();
}

}  // namespace qba
