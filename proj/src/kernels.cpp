#include "qba/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace qba::kernels {

namespace scalar {

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void waxpby(double a, const double* x, double b, const double* y, double* z,
            std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) z[i] = a * x[i] + b * y[i];
}

void csr_spmv(std::size_t n_rows, const std::int32_t* row_ptr,
              const std::int32_t* col_idx, const double* values,
              const double* x, double* y) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    double s = 0.0;
    for (std::int32_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      s += values[k] * x[col_idx[k]];
    y[r] = s;
  }
}

void csr_spmv_add(std::size_t n_rows, const std::int32_t* row_ptr,
                  const std::int32_t* col_idx, const double* values,
                  const double* x, double* y) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    double s = 0.0;
    for (std::int32_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      s += values[k] * x[col_idx[k]];
    y[r] += s;
  }
}

}  // namespace scalar

#if defined(QBA_HAVE_AVX2)
namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void scal(double a, double* x, std::size_t n);
void waxpby(double a, const double* x, double b, const double* y, double* z,
            std::size_t n);
void csr_spmv(std::size_t n_rows, const std::int32_t* row_ptr,
              const std::int32_t* col_idx, const double* values,
              const double* x, double* y);
void csr_spmv_add(std::size_t n_rows, const std::int32_t* row_ptr,
                  const std::int32_t* col_idx, const double* values,
                  const double* x, double* y);
}  // namespace avx2
#endif

bool avx2_available() {
#if defined(QBA_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Backend resolve(Backend b) {
  if (b == Backend::Auto) {
    if (const char* env = std::getenv("QBA_KERNEL_BACKEND")) {
      if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
      if (std::strcmp(env, "avx2") == 0) return Backend::Avx2;
    }
    return avx2_available() ? Backend::Avx2 : Backend::Scalar;
  }
  return b;
}

Backend g_backend = resolve(Backend::Auto);

}  // namespace

void set_backend(Backend b) {
  Backend r = resolve(b);
  if (r == Backend::Avx2 && !avx2_available())
    throw std::runtime_error("kernels: AVX2 backend requested but unavailable");
  g_backend = r;
}

Backend active_backend() { return g_backend; }

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    default: return "auto";
  }
}

#if defined(QBA_HAVE_AVX2)
#define QBA_DISPATCH(fn, ...) \
  return g_backend == Backend::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__)
#else
#define QBA_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

double dot(const double* x, const double* y, std::size_t n) {
  QBA_DISPATCH(dot, x, y, n);
}

double nrm2(const double* x, std::size_t n) { return std::sqrt(dot(x, x, n)); }

void axpy(double a, const double* x, double* y, std::size_t n) {
  QBA_DISPATCH(axpy, a, x, y, n);
}

void scal(double a, double* x, std::size_t n) { QBA_DISPATCH(scal, a, x, n); }

void waxpby(double a, const double* x, double b, const double* y, double* z,
            std::size_t n) {
  QBA_DISPATCH(waxpby, a, x, b, y, z, n);
}

void csr_spmv(std::size_t n_rows, const std::int32_t* row_ptr,
              const std::int32_t* col_idx, const double* values,
              const double* x, double* y) {
  QBA_DISPATCH(csr_spmv, n_rows, row_ptr, col_idx, values, x, y);
}

void csr_spmv_add(std::size_t n_rows, const std::int32_t* row_ptr,
                  const std::int32_t* col_idx, const double* values,
                  const double* x, double* y) {
  QBA_DISPATCH(csr_spmv_add, n_rows, row_ptr, col_idx, values, x, y);
}

#undef QBA_DISPATCH

}  // namespace qba::kernels
