// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; it is only entered through the runtime dispatch in
// kernels.cpp after a cpuid check.

#if defined(QBA_HAVE_AVX2)

#include <immintrin.h>

#include <cstddef>
#include <cstdint>

namespace qba::kernels::avx2 {

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  acc0 = _mm256_add_pd(acc0, acc1);
  __m128d lo = _mm256_castpd256_pd128(acc0);
  __m128d hi = _mm256_extractf128_pd(acc0, 1);
  lo = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

void waxpby(double a, const double* x, double b, const double* y, double* z,
            std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    t = _mm256_fmadd_pd(vb, _mm256_loadu_pd(y + i), t);
    _mm256_storeu_pd(z + i, t);
  }
  for (; i < n; ++i) z[i] = a * x[i] + b * y[i];
}

namespace {

inline double row_dot(const std::int32_t* col_idx, const double* values,
                      std::int32_t begin, std::int32_t end, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  std::int32_t k = begin;
  for (; k + 4 <= end; k += 4) {
    __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(col_idx + k));
    __m256d vx = _mm256_i32gather_pd(x, idx, 8);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(values + k), vx, acc);
  }
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  lo = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; k < end; ++k) s += values[k] * x[col_idx[k]];
  return s;
}

}  // namespace

void csr_spmv(std::size_t n_rows, const std::int32_t* row_ptr,
              const std::int32_t* col_idx, const double* values,
              const double* x, double* y) {
  for (std::size_t r = 0; r < n_rows; ++r)
    y[r] = row_dot(col_idx, values, row_ptr[r], row_ptr[r + 1], x);
}

void csr_spmv_add(std::size_t n_rows, const std::int32_t* row_ptr,
                  const std::int32_t* col_idx, const double* values,
                  const double* x, double* y) {
  for (std::size_t r = 0; r < n_rows; ++r)
    y[r] += row_dot(col_idx, values, row_ptr[r], row_ptr[r + 1], x);
}

}  // namespace qba::kernels::avx2

#endif  // QBA_HAVE_AVX2
