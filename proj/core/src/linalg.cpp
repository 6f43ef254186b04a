#include "harfuse/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "harfuse/errors.hpp"

namespace harfuse::linalg {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::contract, what);
}

void require_finite(const Matrix& m, const char* op) {
  if (!m.all_finite()) throw Error(ErrorCode::contract, std::string(op) + ": non-finite input");
}

// Absolute asymmetry tolerance, relaxed for large-magnitude inputs.
void require_symmetric(const Matrix& m, const char* op) {
  require(m.rows() == m.cols(), std::string(op) + ": matrix is not square");
  const double tol = 1e-8 * std::max(1.0, max_abs(m));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > tol) {
        throw Error(ErrorCode::contract, std::string(op) + ": matrix is not symmetric at (" +
                                             std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows * cols, "Matrix: data length does not match shape");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    require(row.size() == c, "Matrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matrix product: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "matrix sum: shapes differ");
  Matrix out = a;
  auto o = out.values();
  auto v = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += v[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "matrix difference: shapes differ");
  Matrix out = a;
  auto o = out.values();
  auto v = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= v[i];
  return out;
}

Matrix operator*(double s, const Matrix& m) {
  Matrix out = m;
  for (double& v : out.values()) v *= s;
  return out;
}

double norm_inf(const Matrix& m) {
  double best = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) s += std::abs(v);
    best = std::max(best, s);
  }
  return best;
}

double norm_frobenius(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double v : m.values()) best = std::max(best, std::abs(v));
  return best;
}

double trace(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) s += m(i, i);
  return s;
}

std::vector<double> column_means(const Matrix& samples) {
  std::vector<double> means(samples.cols(), 0.0);
  if (samples.rows() == 0) return means;
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    auto row = samples.row(r);
    for (std::size_t c = 0; c < samples.cols(); ++c) means[c] += row[c];
  }
  for (double& m : means) m /= static_cast<double>(samples.rows());
  return means;
}

Matrix center_columns(const Matrix& samples, std::span<const double> means) {
  require(means.size() == samples.cols(), "center_columns: mean length mismatch");
  Matrix out = samples;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols(); ++c) row[c] -= means[c];
  }
  return out;
}

Matrix cross_covariance(const Matrix& x, const Matrix& y, bool centered) {
  require(x.rows() == y.rows(), "cross_covariance: sample counts differ");
  const std::size_t n = x.rows();
  if (n < 2) {
    throw Error(ErrorCode::insufficient_samples,
                "covariance needs at least 2 samples, got " + std::to_string(n));
  }
  const Matrix xc = centered ? center_columns(x, column_means(x)) : x;
  const Matrix yc = centered ? center_columns(y, column_means(y)) : y;
  Matrix out(x.cols(), y.cols());
  for (std::size_t r = 0; r < n; ++r) {
    auto xr = xc.row(r);
    auto yr = yc.row(r);
    for (std::size_t i = 0; i < x.cols(); ++i) {
      const double xi = xr[i];
      if (xi == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < y.cols(); ++j) dst[j] += xi * yr[j];
    }
  }
  const double scale = 1.0 / static_cast<double>(n - 1);
  for (double& v : out.values()) v *= scale;
  return out;
}

Matrix covariance(const Matrix& samples, bool centered) {
  Matrix cov = cross_covariance(samples, samples, centered);
  // Mirror the upper triangle so the result is symmetric bit for bit.
  for (std::size_t i = 0; i < cov.rows(); ++i)
    for (std::size_t j = i + 1; j < cov.cols(); ++j) cov(j, i) = cov(i, j);
  return cov;
}

SymmetricEigen sym_eig(const Matrix& m) {
  require_finite(m, "sym_eig");
  require_symmetric(m, "sym_eig");
  const std::size_t n = m.rows();

  Matrix a = m;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (m(i, j) + m(j, i));
  Matrix v = Matrix::identity(n);

  const double scale = norm_frobenius(a);
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && scale > 0.0; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-12 * scale) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::hypot(t, 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

Matrix cholesky(const Matrix& m, double ridge) {
  require(ridge >= 0.0, "cholesky: ridge must be non-negative");
  require_finite(m, "cholesky");
  require_symmetric(m, "cholesky");
  const std::size_t n = m.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j) + ridge;
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw NotPositiveDefiniteError(j, d);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

Matrix solve_lower(const Matrix& lower, const Matrix& rhs) {
  require(lower.rows() == lower.cols() && lower.rows() == rhs.rows(),
          "solve_lower: dimension mismatch");
  const std::size_t n = lower.rows();
  Matrix x = rhs;
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = x.row(i);
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = lower(i, k);
      if (lik == 0.0) continue;
      auto xk = x.row(k);
      for (std::size_t c = 0; c < x.cols(); ++c) xi[c] -= lik * xk[c];
    }
    const double d = lower(i, i);
    for (double& v : xi) v /= d;
  }
  return x;
}

Matrix solve_lower_transposed(const Matrix& lower, const Matrix& rhs) {
  require(lower.rows() == lower.cols() && lower.rows() == rhs.rows(),
          "solve_lower_transposed: dimension mismatch");
  const std::size_t n = lower.rows();
  Matrix x = rhs;
  for (std::size_t ii = n; ii-- > 0;) {
    auto xi = x.row(ii);
    for (std::size_t k = ii + 1; k < n; ++k) {
      const double lki = lower(k, ii);
      if (lki == 0.0) continue;
      auto xk = x.row(k);
      for (std::size_t c = 0; c < x.cols(); ++c) xi[c] -= lki * xk[c];
    }
    const double d = lower(ii, ii);
    for (double& v : xi) v /= d;
  }
  return x;
}

namespace {

// Tall case (rows >= cols): eigenvectors of mᵀm give V; singular values are
// recomputed as ‖m·vᵢ‖, which is accurate near zero unlike √λ.
ThinSvd thin_svd_tall(const Matrix& m) {
  const std::size_t p = m.rows();
  const std::size_t q = m.cols();
  const SymmetricEigen eig = sym_eig(m.transpose() * m);
  const Matrix mv = m * eig.vectors;

  std::vector<double> s(q);
  for (std::size_t i = 0; i < q; ++i) {
    double n2 = 0.0;
    for (std::size_t r = 0; r < p; ++r) n2 += mv(r, i) * mv(r, i);
    s[i] = std::sqrt(n2);
  }
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });

  ThinSvd out{Matrix(p, q), std::vector<double>(q), Matrix(q, q)};
  const double s_max = q == 0 ? 0.0 : s[order[0]];
  std::vector<double> u(p);
  std::size_t next_basis = 0;
  for (std::size_t k = 0; k < q; ++k) {
    const std::size_t src = order[k];
    out.s[k] = s[src];
    for (std::size_t r = 0; r < q; ++r) out.v(r, k) = eig.vectors(r, src);

    for (std::size_t r = 0; r < p; ++r) u[r] = mv(r, src);
    double norm = 0.0;
    bool usable = s[src] > 1e-13 * s_max && s[src] > 0.0;
    if (usable) {
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < k; ++j) {
          double proj = 0.0;
          for (std::size_t r = 0; r < p; ++r) proj += out.u(r, j) * u[r];
          for (std::size_t r = 0; r < p; ++r) u[r] -= proj * out.u(r, j);
        }
      }
      norm = std::sqrt(dot(u, u));
      usable = norm > 1e-8 * s[src];
    }
    // Null-space columns: complete the basis from coordinate vectors.
    while (!usable && next_basis < p) {
      std::fill(u.begin(), u.end(), 0.0);
      u[next_basis++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < k; ++j) {
          double d = 0.0;
          for (std::size_t r = 0; r < p; ++r) d += out.u(r, j) * u[r];
          for (std::size_t r = 0; r < p; ++r) u[r] -= d * out.u(r, j);
        }
      }
      norm = std::sqrt(dot(u, u));
      usable = norm > 1e-6;
    }
    for (std::size_t r = 0; r < p; ++r) out.u(r, k) = u[r] / norm;
  }
  return out;
}

}  // namespace

ThinSvd thin_svd(const Matrix& m) {
  require_finite(m, "thin_svd");
  if (m.rows() >= m.cols()) return thin_svd_tall(m);
  ThinSvd t = thin_svd_tall(m.transpose());
  std::swap(t.u, t.v);
  return t;
}

}  // namespace harfuse::linalg
