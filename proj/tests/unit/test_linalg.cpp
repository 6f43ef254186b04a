#include <doctest.h>

#include <cmath>

#include "harfuse/errors.hpp"
#include "harfuse/linalg.hpp"
#include "support.hpp"

using namespace harfuse;
using namespace harfuse::linalg;
using harfuse::testing::max_abs_diff;
using harfuse::testing::random_matrix;

namespace {

Matrix random_symmetric(std::size_t n, Rng& rng) {
  const Matrix a = random_matrix(n, n, rng);
  return 0.5 * (a + a.transpose());
}

double orthonormality_defect(const Matrix& q) {
  return max_abs_diff(q.transpose() * q, Matrix::identity(q.cols()));
}

}  // namespace

TEST_CASE("covariance of two identical rows is zero") {
  const Matrix x = Matrix::from_rows({{1.5, -2.0, 3.0}, {1.5, -2.0, 3.0}});
  CHECK(covariance(x) == Matrix(3, 3, 0.0));
}

TEST_CASE("covariance hand example") {
  const Matrix x = Matrix::from_rows({{1, 0}, {-1, 0}});
  CHECK(covariance(x) == Matrix::from_rows({{2, 0}, {0, 0}}));
}

TEST_CASE("covariance matches element-wise double loop") {
  Rng rng(11);
  const Matrix x = random_matrix(5, 3, rng);
  const Matrix c = covariance(x);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < 5; ++i) {
        ma += x(i, a) / 5.0;
        mb += x(i, b) / 5.0;
      }
      double s = 0;
      for (std::size_t i = 0; i < 5; ++i) s += (x(i, a) - ma) * (x(i, b) - mb);
      CHECK(std::abs(c(a, b) - s / 4.0) <= 1e-12);
    }
  }
}

TEST_CASE("covariance is exactly symmetric and PSD") {
  Rng rng(12);
  const Matrix c = covariance(random_matrix(7, 6, rng));
  CHECK(c == c.transpose());
  for (double v : sym_eig(c).values) CHECK(v >= -1e-10);
}

TEST_CASE("covariance uncentered skips the mean") {
  const Matrix x = Matrix::from_rows({{1, 1}, {1, 1}});
  CHECK(covariance(x, false) == Matrix::from_rows({{2, 2}, {2, 2}}));
}

TEST_CASE("covariance rejects a single sample") {
  try {
    (void)covariance(Matrix(1, 3));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_samples);
  }
}

TEST_CASE("sym_eig of identity and diagonal") {
  const auto id = sym_eig(Matrix::identity(3));
  CHECK(id.values == std::vector<double>{1, 1, 1});
  const double d[] = {5, 2, -1};
  const auto dg = sym_eig(Matrix::diagonal(d));
  CHECK(dg.values == std::vector<double>{5, 2, -1});
  const double shuffled[] = {2, -1, 5};
  CHECK(sym_eig(Matrix::diagonal(shuffled)).values == std::vector<double>{5, 2, -1});
}

TEST_CASE("sym_eig reconstruction, residuals, orthonormality, trace") {
  Rng rng(13);
  for (std::size_t n : {1u, 2u, 4u, 9u, 30u}) {
    const Matrix m = random_symmetric(n, rng);
    const auto eig = sym_eig(m);
    const Matrix rebuilt = eig.vectors * Matrix::diagonal(eig.values) * eig.vectors.transpose();
    CHECK(max_abs_diff(rebuilt, m) <= 1e-8);
    CHECK(orthonormality_defect(eig.vectors) <= 1e-8);
    for (std::size_t i = 0; i + 1 < n; ++i) CHECK(eig.values[i] >= eig.values[i + 1]);
    for (std::size_t i = 0; i < n; ++i) {
      double worst = 0;
      for (std::size_t r = 0; r < n; ++r) {
        double mv = 0;
        for (std::size_t k = 0; k < n; ++k) mv += m(r, k) * eig.vectors(k, i);
        worst = std::max(worst, std::abs(mv - eig.values[i] * eig.vectors(r, i)));
      }
      CHECK(worst <= 1e-8 * norm_inf(m));
    }
    double sum = 0;
    for (double v : eig.values) sum += v;
    CHECK(std::abs(sum - trace(m)) <= 1e-8 * static_cast<double>(n) * norm_inf(m));
  }
}

TEST_CASE("sym_eig rejects asymmetric input") {
  Matrix m = Matrix::identity(3);
  m(0, 2) = 1e-3;
  try {
    (void)sym_eig(m);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::contract);
  }
}

TEST_CASE("sym_eig is deterministic") {
  Rng rng(14);
  const Matrix m = random_symmetric(12, rng);
  const auto a = sym_eig(m);
  const auto b = sym_eig(m);
  CHECK(a.values == b.values);
  CHECK(a.vectors == b.vectors);
}

TEST_CASE("cholesky examples") {
  CHECK(cholesky(Matrix::identity(4)) == Matrix::identity(4));
  const Matrix l = cholesky(Matrix::from_rows({{4, 2}, {2, 3}}));
  CHECK(l(0, 0) == 2.0);
  CHECK(l(0, 1) == 0.0);
  CHECK(l(1, 0) == 1.0);
  CHECK(std::abs(l(1, 1) - std::sqrt(2.0)) <= 1e-15);
}

TEST_CASE("cholesky with ridge on a singular matrix") {
  const Matrix m = Matrix::from_rows({{1, 1}, {1, 1}});
  const Matrix l = cholesky(m, 1e-4);
  const Matrix target = m + 1e-4 * Matrix::identity(2);
  CHECK(max_abs_diff(l * l.transpose(), target) <= 1e-10 * norm_inf(m));
}

TEST_CASE("cholesky reconstruction on random SPD") {
  Rng rng(15);
  const Matrix a = random_matrix(20, 8, rng);
  const Matrix spd = a.transpose() * a;
  const Matrix l = cholesky(spd);
  CHECK(max_abs_diff(l * l.transpose(), spd) <= 1e-10 * norm_inf(spd));
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = r + 1; c < 8; ++c) CHECK(l(r, c) == 0.0);
}

TEST_CASE("cholesky reports the failing pivot") {
  const Matrix m = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, -1}});
  try {
    (void)cholesky(m);
    FAIL("expected an error");
  } catch (const NotPositiveDefiniteError& e) {
    CHECK(e.pivot() == 2);
    CHECK(e.code() == ErrorCode::not_positive_definite);
  }
}

TEST_CASE("triangular solves") {
  Rng rng(16);
  const Matrix a = random_matrix(10, 5, rng);
  const Matrix l = cholesky(a.transpose() * a);
  const Matrix b = random_matrix(5, 3, rng);
  CHECK(max_abs_diff(l * solve_lower(l, b), b) <= 1e-10);
  CHECK(max_abs_diff(l.transpose() * solve_lower_transposed(l, b), b) <= 1e-10);
}

TEST_CASE("thin_svd of zero and diagonal matrices") {
  const auto z = thin_svd(Matrix(4, 3));
  CHECK(z.s == std::vector<double>{0, 0, 0});
  CHECK(orthonormality_defect(z.u) <= 1e-8);
  CHECK(orthonormality_defect(z.v) <= 1e-8);
  const double d[] = {3, 1};
  const auto s = thin_svd(Matrix::diagonal(d));
  CHECK(std::abs(s.s[0] - 3) <= 1e-12);
  CHECK(std::abs(s.s[1] - 1) <= 1e-12);
}

TEST_CASE("thin_svd reconstruction and orthonormality") {
  Rng rng(17);
  for (auto [p, q] : {std::pair{5, 3}, std::pair{3, 5}, std::pair{16, 16}, std::pair{40, 7}}) {
    const Matrix m = random_matrix(p, q, rng);
    const auto svd = thin_svd(m);
    const std::size_t r = std::min(p, q);
    REQUIRE(svd.u.rows() == static_cast<std::size_t>(p));
    REQUIRE(svd.u.cols() == r);
    REQUIRE(svd.v.rows() == static_cast<std::size_t>(q));
    const Matrix rebuilt = svd.u * Matrix::diagonal(svd.s) * svd.v.transpose();
    CHECK(norm_inf(rebuilt - m) <= 1e-8 * norm_inf(m));
    CHECK(orthonormality_defect(svd.u) <= 1e-8);
    CHECK(orthonormality_defect(svd.v) <= 1e-8);
    for (std::size_t i = 0; i < r; ++i) {
      CHECK(svd.s[i] >= 0.0);
      if (i + 1 < r) CHECK(svd.s[i] >= svd.s[i + 1]);
    }
    const auto st = thin_svd(m.transpose());
    for (std::size_t i = 0; i < r; ++i) CHECK(std::abs(st.s[i] - svd.s[i]) <= 1e-10);
  }
}

TEST_CASE("thin_svd of a rank-deficient matrix keeps orthonormal factors") {
  Rng rng(18);
  const Matrix a = random_matrix(6, 2, rng);
  const Matrix m = a * random_matrix(2, 4, rng);
  const auto svd = thin_svd(m);
  CHECK(svd.s[2] <= 1e-10);
  CHECK(orthonormality_defect(svd.u) <= 1e-8);
  CHECK(orthonormality_defect(svd.v) <= 1e-8);
  CHECK(norm_inf(svd.u * Matrix::diagonal(svd.s) * svd.v.transpose() - m) <= 1e-8 * norm_inf(m));
}

TEST_CASE("thin_svd rejects non-finite input") {
  Matrix m(2, 2, 1.0);
  m(1, 1) = NAN;
  CHECK_THROWS_AS((void)thin_svd(m), Error);
}
