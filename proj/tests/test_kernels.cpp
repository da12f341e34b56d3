#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "qba/csr.hpp"
#include "qba/kernels.hpp"

using namespace qba;
namespace k = qba::kernels;

namespace {

std::vector<double> random_vec(std::mt19937& rng, std::size_t n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = gauss(rng);
  return v;
}

CsrMatrix random_csr(std::mt19937& rng, std::int32_t rows, std::int32_t cols) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_int_distribution<std::int32_t> pick(0, cols - 1);
  CsrBuilder b(rows, cols);
  for (std::int32_t r = 0; r < rows; ++r) {
    const int nnz = 1 + static_cast<int>(rng() % 7);
    for (int j = 0; j < nnz; ++j) b.add(r, pick(rng), uni(rng));
  }
  return b.build();
}

struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::set_backend(saved); }
};

}  // namespace

TEST_CASE("scalar and simd variants agree on ragged sizes") {
  if (!k::avx2_available()) return;  // nothing to compare on this host
  BackendGuard guard;
  std::mt19937 rng(42);
  for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 33u, 100u, 1001u}) {
    auto x = random_vec(rng, n);
    auto y = random_vec(rng, n);

    k::set_backend(k::Backend::Scalar);
    const double dot_s = k::dot(x.data(), y.data(), n);
    std::vector<double> ax_s = y;
    k::axpy(0.37, x.data(), ax_s.data(), n);
    std::vector<double> w_s(n);
    k::waxpby(1.25, x.data(), -0.5, y.data(), w_s.data(), n);
    std::vector<double> sc_s = x;
    k::scal(-1.75, sc_s.data(), n);

    k::set_backend(k::Backend::Avx2);
    const double dot_v = k::dot(x.data(), y.data(), n);
    std::vector<double> ax_v = y;
    k::axpy(0.37, x.data(), ax_v.data(), n);
    std::vector<double> w_v(n);
    k::waxpby(1.25, x.data(), -0.5, y.data(), w_v.data(), n);
    std::vector<double> sc_v = x;
    k::scal(-1.75, sc_v.data(), n);

    CHECK(dot_s == doctest::Approx(dot_v).epsilon(1e-13));
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(ax_s[i] == doctest::Approx(ax_v[i]).epsilon(1e-14));
      CHECK(w_s[i] == doctest::Approx(w_v[i]).epsilon(1e-14));
      CHECK(sc_s[i] == sc_v[i]);
    }
  }
}

TEST_CASE("csr spmv backends agree") {
  if (!k::avx2_available()) return;
  BackendGuard guard;
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int32_t rows = 1 + static_cast<std::int32_t>(rng() % 40);
    const std::int32_t cols = 1 + static_cast<std::int32_t>(rng() % 40);
    CsrMatrix A = random_csr(rng, rows, cols);
    auto x = random_vec(rng, cols);

    k::set_backend(k::Backend::Scalar);
    std::vector<double> ys(rows);
    A.matvec(x.data(), ys.data());
    k::set_backend(k::Backend::Avx2);
    std::vector<double> yv(rows);
    A.matvec(x.data(), yv.data());
    for (std::int32_t r = 0; r < rows; ++r)
      CHECK(ys[r] == doctest::Approx(yv[r]).epsilon(1e-13));
  }
}

TEST_CASE("kernels are deterministic run to run") {
  std::mt19937 rng(3);
  auto x = random_vec(rng, 257);
  auto y = random_vec(rng, 257);
  const double d1 = k::dot(x.data(), y.data(), x.size());
  const double d2 = k::dot(x.data(), y.data(), x.size());
  CHECK(d1 == d2);
}

TEST_CASE("csr transpose and symmetry defect") {
  std::mt19937 rng(11);
  CsrMatrix A = random_csr(rng, 12, 12);
  CsrMatrix At = A.transposed();
  CsrMatrix Att = At.transposed();
  REQUIRE(Att.nnz() == A.nnz());
  auto x = random_vec(rng, 12);
  auto y1 = A.matvec(x);
  auto y2 = Att.matvec(x);
  for (int i = 0; i < 12; ++i) CHECK(y1[i] == doctest::Approx(y2[i]));

  CsrMatrix S = csr_add(0.5, A, 0.5, At);
  CHECK(S.symmetry_defect() <= 1e-15);
  S.validate();
}
