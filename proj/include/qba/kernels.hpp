#ifndef QBA_KERNELS_HPP
#define QBA_KERNELS_HPP

#include <cstddef>
#include <cstdint>
#include <string>

// Low-level dense kernels used by the iterative solvers and assembly.
// Each kernel has a scalar reference implementation and, on x86-64 with
// AVX2+FMA, a vectorized variant. The active variant is selected once at
// runtime; set_backend() forces a particular one (used by the equivalence
// tests and the QBA_KERNEL_BACKEND environment variable).

namespace qba::kernels {

enum class Backend { Auto, Scalar, Avx2 };

// Selects the backend for all subsequent kernel calls. Auto picks Avx2
// when the CPU supports AVX2 and FMA, otherwise Scalar.
void set_backend(Backend b);
Backend active_backend();
const char* backend_name(Backend b);

// True if the AVX2 variant can run on this CPU.
bool avx2_available();

double dot(const double* x, const double* y, std::size_t n);
double nrm2(const double* x, std::size_t n);

// y += a*x
void axpy(double a, const double* x, double* y, std::size_t n);
// x *= a
void scal(double a, double* x, std::size_t n);
// z = a*x + b*y
void waxpby(double a, const double* x, double b, const double* y, double* z,
            std::size_t n);

// y = A*x for a CSR matrix given by (row_ptr, col_idx, values).
void csr_spmv(std::size_t n_rows, const std::int32_t* row_ptr,
              const std::int32_t* col_idx, const double* values,
              const double* x, double* y);

// y += A*x
void csr_spmv_add(std::size_t n_rows, const std::int32_t* row_ptr,
                  const std::int32_t* col_idx, const double* values,
                  const double* x, double* y);

}  // namespace qba::kernels

#endif
