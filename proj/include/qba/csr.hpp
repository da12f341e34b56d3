#ifndef QBA_CSR_HPP
#define QBA_CSR_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qba {

/// Compressed sparse row matrix. Column indices are sorted and unique
/// within each row; row_ptr[0] = 0 and row_ptr[n_rows] = values.size().
struct CsrMatrix {
  std::int32_t n_rows = 0;
  std::int32_t n_cols = 0;
  std::vector<std::int32_t> row_ptr;
  std::vector<std::int32_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }

  // y = A*x
  void matvec(const double* x, double* y) const;
  std::vector<double> matvec(const std::vector<double>& x) const;
  // y += s*A*x
  void matvec_add(double s, const double* x, double* y) const;

  CsrMatrix transposed() const;
  std::vector<std::vector<double>> to_dense() const;

  double max_abs() const;
  // max |A_ij - A_ji|
  double symmetry_defect() const;
  // structural + value validity of the CSR invariants
  void validate() const;
};

/// Accumulates (row, col, value) contributions in a deterministic order
/// and converts to CSR. Insertion order per entry is the element loop
/// order, so assembled matrices are bit-reproducible.
class CsrBuilder {
 public:
  CsrBuilder(std::int32_t n_rows, std::int32_t n_cols)
      : n_rows_(n_rows), n_cols_(n_cols), rows_(n_rows) {}

  void add(std::int32_t r, std::int32_t c, double v) { rows_[r][c] += v; }
  CsrMatrix build() const;

 private:
  std::int32_t n_rows_, n_cols_;
  std::vector<std::map<std::int32_t, double>> rows_;
};

// C = a*A + b*B on the union sparsity pattern (dimensions must match).
CsrMatrix csr_add(double a, const CsrMatrix& A, double b, const CsrMatrix& B);

// MatrixMarket coordinate format (1-based indices), used by CLI debug dumps.
std::string to_matrix_market(const CsrMatrix& A);

}  // namespace qba

#endif
