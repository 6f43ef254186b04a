#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "harfuse/cca.hpp"
#include "harfuse/errors.hpp"
#include "support.hpp"

using namespace harfuse;
using harfuse::testing::max_abs_diff;
using harfuse::testing::random_normal;
using harfuse::testing::TempDir;
using linalg::Matrix;

namespace {

// Y shares a latent signal with X plus independent noise.
std::pair<Matrix, Matrix> correlated_pair(std::size_t n, std::size_t p, std::size_t q, Rng& rng) {
  const Matrix z = random_normal(n, std::min(p, q), rng);
  Matrix x = random_normal(n, p, rng);
  Matrix y = random_normal(n, q, rng);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < z.cols(); ++k) {
      x(i, k) += (1.0 + k) * z(i, k);
      y(i, k) += 0.5 * (k + 1) * z(i, k);
    }
  // Mixing close to the identity keeps the problem well conditioned.
  Matrix mix = (0.25 / std::sqrt(static_cast<double>(p))) * random_normal(p, p, rng);
  for (std::size_t i = 0; i < p; ++i) mix(i, i) += 1.0;
  return {x * mix, y};
}

FeatureMatrix tagged(const Matrix& m, Domain d, std::uint64_t first_id = 0) {
  FeatureMatrix f;
  f.values = m;
  f.domain = d;
  for (std::size_t i = 0; i < m.rows(); ++i) f.sample_ids.push_back(first_id + i);
  return f;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("self-correlation gives unit lambdas") {
  Rng rng(1);
  const Matrix x = random_normal(100, 5, rng);
  const CcaModel m = fit_cca(x, x, 1e-8);
  REQUIRE(m.d() == 5);
  for (double l : m.lambdas) CHECK(std::abs(l - 1.0) <= 1e-4);
}

TEST_CASE("single-column CCA equals absolute Pearson correlation") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x = random_normal(50, 1, rng);
    Matrix y = random_normal(50, 1, rng);
    const double mix = trial % 2 ? 0.7 : -0.4;
    for (std::size_t i = 0; i < 50; ++i) y(i, 0) += mix * x(i, 0);
    const CcaModel m = fit_cca(x, y, 0.0);
    REQUIRE(m.d() == 1);
    CHECK(std::abs(m.lambdas[0] - std::abs(pearson(x.values(), y.values()))) <= 1e-8);
  }
}

TEST_CASE("linear images are perfectly correlated, independent sets are not") {
  Rng rng(3);
  const Matrix x = random_normal(300, 4, rng);
  const Matrix r = random_normal(4, 4, rng);
  for (double l : fit_cca(x, x * r, 1e-8).lambdas) CHECK(std::abs(l - 1.0) <= 1e-4);
  const Matrix y = random_normal(300, 4, rng);
  for (double l : fit_cca(x, y, 1e-8).lambdas) CHECK(l < 0.5);
}

TEST_CASE("canonical variates reproduce the block covariance structure") {
  Rng rng(4);
  for (std::size_t p : {4u, 16u}) {
    const auto [x, y] = correlated_pair(200, p, p, rng);
    const CcaModel m = fit_cca(x, y, 1e-8);
    const auto v = transform(m, x, y);
    const Matrix cxx = linalg::covariance(v.x);
    const Matrix cyy = linalg::covariance(v.y);
    const Matrix cxy = linalg::cross_covariance(v.x, v.y);
    for (std::size_t i = 0; i < m.d(); ++i) {
      CHECK(std::abs(cxx(i, i) - 1.0) <= 1e-3);
      CHECK(std::abs(cyy(i, i) - 1.0) <= 1e-3);
      for (std::size_t j = 0; j < m.d(); ++j) {
        const double corr = cxy(i, j) / std::sqrt(cxx(i, i) * cyy(j, j));
        if (i == j) {
          CHECK(std::abs(corr - m.lambdas[i]) <= 1e-6);
        } else {
          CHECK(std::abs(corr) <= 1e-6);
          CHECK(std::abs(cxx(i, j)) <= 1e-6);
          CHECK(std::abs(cyy(i, j)) <= 1e-6);
        }
      }
    }
    for (std::size_t i = 0; i + 1 < m.d(); ++i) CHECK(m.lambdas[i] >= m.lambdas[i + 1]);
    for (double l : m.lambdas) {
      CHECK(l >= 0.0);
      CHECK(l <= 1.0 + 1e-8);
    }
  }
}

TEST_CASE("lambdas match the eigenvalues of the literal eigenproblem") {
  Rng rng(5);
  const Matrix x = random_normal(5, 2, rng);
  const Matrix y = random_normal(5, 2, rng);
  const Matrix sxx = linalg::covariance(x), syy = linalg::covariance(y);
  const Matrix sxy = linalg::cross_covariance(x, y);
  auto inv2 = [](const Matrix& m) {
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    return Matrix::from_rows({{m(1, 1) / det, -m(0, 1) / det}, {-m(1, 0) / det, m(0, 0) / det}});
  };
  const Matrix k = inv2(sxx) * sxy * inv2(syy) * sxy.transpose();
  const double tr = k(0, 0) + k(1, 1);
  const double det = k(0, 0) * k(1, 1) - k(0, 1) * k(1, 0);
  const double disc = std::sqrt(tr * tr / 4 - det);
  const double e1 = tr / 2 + disc, e2 = tr / 2 - disc;

  const CcaModel m = fit_cca(x, y, 0.0);
  REQUIRE(m.d() == 2);
  CHECK(std::abs(m.lambdas[0] * m.lambdas[0] - e1) <= 1e-8);
  CHECK(std::abs(m.lambdas[1] * m.lambdas[1] - e2) <= 1e-8);
}

TEST_CASE("lambdas are affine invariant and symmetric in the two sets") {
  Rng rng(6);
  const auto [x, y] = correlated_pair(200, 4, 4, rng);
  const Matrix r = random_normal(4, 4, rng);
  Matrix xt = x * r;
  for (std::size_t i = 0; i < xt.rows(); ++i)
    for (std::size_t j = 0; j < 4; ++j) xt(i, j) += 3.0 - j;
  const CcaModel a = fit_cca(x, y, 0.0);
  const CcaModel b = fit_cca(xt, y, 0.0);
  const CcaModel c = fit_cca(y, x, 0.0);
  REQUIRE(a.d() == b.d());
  REQUIRE(a.d() == c.d());
  for (std::size_t i = 0; i < a.d(); ++i) {
    CHECK(std::abs(a.lambdas[i] - b.lambdas[i]) <= 1e-6);
    CHECK(std::abs(a.lambdas[i] - c.lambdas[i]) <= 1e-10);
  }
}

TEST_CASE("dimension is bounded by the rank condition") {
  Rng rng(7);
  const Matrix x = random_normal(6, 10, rng);
  const Matrix y = random_normal(6, 8, rng);
  CHECK(fit_cca(x, y).d() <= 5);

  // Σxy of rank 2.
  const Matrix z = random_normal(100, 2, rng);
  const Matrix xr = z * random_normal(2, 5, rng) + 1e-3 * random_normal(100, 5, rng);
  Matrix yr = random_normal(100, 4, rng);
  for (std::size_t i = 0; i < 100; ++i) yr(i, 0) = z(i, 0), yr(i, 1) = z(i, 1);
  const CcaModel m = fit_cca(xr, yr, 1e-8);
  CHECK(m.d() <= 4);
  CHECK(m.lambdas[0] > 0.99);
  CHECK(m.lambdas[1] > 0.99);
  CHECK(m.lambdas[2] < 0.5);
}

TEST_CASE("sign convention: largest entry of each A column is positive") {
  Rng rng(8);
  const auto [x, y] = correlated_pair(80, 6, 5, rng);
  const CcaModel m = fit_cca(x, y);
  CHECK(m.a.rows() == 6);
  CHECK(m.b.rows() == 5);
  for (std::size_t k = 0; k < m.d(); ++k) {
    const auto col = m.a.column(k);
    const auto it = std::max_element(col.begin(), col.end(), [](double l, double r) { return std::abs(l) < std::abs(r); });
    CHECK(*it > 0.0);
  }
  const auto v = transform(m, x, y);
  for (std::size_t k = 0; k < m.d(); ++k) CHECK(pearson(v.x.column(k), v.y.column(k)) > 0.0);
}

TEST_CASE("ridge is scaled by the mean variance") {
  Rng rng(9);
  const auto [x, y] = correlated_pair(50, 3, 3, rng);
  const CcaModel m = fit_cca(x, y, 0.5);
  CHECK(std::abs(m.ridge_x - 0.5 * linalg::trace(linalg::covariance(x)) / 3) <= 1e-12);
  CHECK(std::abs(m.ridge_y - 0.5 * linalg::trace(linalg::covariance(y)) / 3) <= 1e-12);
  CHECK(m.ridge_scale == 0.5);
}

TEST_CASE("fit and transform errors") {
  Rng rng(10);
  const Matrix x = random_normal(10, 3, rng);
  CHECK_THROWS_AS((void)fit_cca(Matrix(2, 3), Matrix(2, 3)), Error);
  try {
    (void)fit_cca(x, random_normal(9, 3, rng));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::alignment);
  }
  try {
    (void)fit_cca(tagged(x, Domain::spatial, 0), tagged(x, Domain::frequency, 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::alignment);
  }
  try {
    (void)fit_cca(Matrix(2, 1), Matrix(2, 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_samples);
  }
  const CcaModel m = fit_cca(x, x);
  try {
    (void)transform(m, random_normal(4, 2, rng), random_normal(4, 3, rng));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::contract);
  }
}

TEST_CASE("fuse_sum") {
  Rng rng(11);
  const Matrix a = random_normal(4, 3, rng);
  CHECK(fuse_sum(a, -1.0 * a) == Matrix(4, 3, 0.0));
  CHECK(fuse_sum(a, Matrix(4, 3)) == a);
  const Matrix b = random_normal(4, 3, rng);
  const Matrix s = fuse_sum(a, b);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.values()[i] == a.values()[i] + b.values()[i]);
  CHECK_THROWS_AS((void)fuse_sum(a, Matrix(3, 3)), Error);
}

TEST_CASE("two-stage fusion") {
  Rng rng(12);
  const Matrix x = random_normal(60, 4, rng);
  const auto same = two_stage_fuse(tagged(x, Domain::spatial), tagged(x, Domain::frequency),
                                   tagged(x, Domain::time_spectrum), 1e-8);
  for (double l : same.models.stage2.lambdas) CHECK(std::abs(l - 1.0) <= 1e-3);

  const auto [s, f] = correlated_pair(60, 6, 5, rng);
  const Matrix t = random_normal(60, 7, rng);
  const auto r = two_stage_fuse(tagged(s, Domain::spatial), tagged(f, Domain::frequency),
                                tagged(t, Domain::time_spectrum));
  CHECK(r.stage1.values.rows() == 60);
  CHECK(r.fused.values.rows() == 60);
  CHECK(r.stage1.stage == FusionStage::stage1);
  CHECK(r.fused.stage == FusionStage::stage2);
  CHECK(r.fused.values.cols() == r.models.stage2.d());
  CHECK(r.models.stage1.p() == 6);
  CHECK(r.models.stage2.q() == 7);

  const FeatureMatrix fs = tagged(s, Domain::spatial), ff = tagged(f, Domain::frequency),
                      ft = tagged(t, Domain::time_spectrum);
  const FusedFeatures again = r.models.apply({&fs, &ff, &ft});
  CHECK(max_abs_diff(again.values, r.fused.values) <= 1e-12);
  CHECK(again.sample_ids == fs.sample_ids);

  const FeatureMatrix shifted = tagged(t, Domain::time_spectrum, 5);
  CHECK_THROWS_AS((void)two_stage_fuse(fs, ff, shifted), Error);

  const auto swapped = two_stage_fuse(fs, ff, ft, kDefaultCcaRidge,
                                      {Domain::time_spectrum, Domain::spatial, Domain::frequency});
  CHECK(swapped.models.stage1.p() == 7);
  CHECK_THROWS_AS(validate_stage_order({Domain::spatial, Domain::spatial, Domain::frequency}), Error);
}

TEST_CASE("CCA model round trip") {
  TempDir dir("cca");
  Rng rng(13);
  const auto [x, y] = correlated_pair(40, 3, 4, rng);
  const CcaModel m = fit_cca(x, y);
  save_cca(m, dir.path() / "m.hfcca");
  const CcaModel back = load_cca(dir.path() / "m.hfcca");
  CHECK(back.a == m.a);
  CHECK(back.b == m.b);
  CHECK(back.lambdas == m.lambdas);
  CHECK(back.mean_x == m.mean_x);
  CHECK(back.ridge_y == m.ridge_y);
  CHECK(parameter_hash(back) == parameter_hash(m));
}

TEST_CASE("fit_cca is deterministic") {
  Rng rng(14);
  const auto [x, y] = correlated_pair(70, 8, 8, rng);
  const CcaModel a = fit_cca(x, y), b = fit_cca(x, y);
  CHECK(a.a == b.a);
  CHECK(a.lambdas == b.lambdas);
}
