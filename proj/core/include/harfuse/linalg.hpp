#pragma once

// Dense double-precision linear algebra used by covariance estimation, CCA
// and the classifiers. Everything here is a pure function of its inputs.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace harfuse::linalg {

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::vector<double> column(std::size_t c) const;
  Matrix transpose() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& m);

/// Induced infinity norm (maximum absolute row sum).
double norm_inf(const Matrix& m);
double norm_frobenius(const Matrix& m);
/// Largest absolute entry.
double max_abs(const Matrix& m);
double trace(const Matrix& m);

std::vector<double> column_means(const Matrix& samples);
/// Subtracts `means` from every row.
Matrix center_columns(const Matrix& samples, std::span<const double> means);

/// Sample covariance (1/(n-1)) Xcᵀ Xc of an n×p sample matrix, exactly symmetric.
/// Columns are mean-centered first when `centered` is true.
Matrix covariance(const Matrix& samples, bool centered = true);

/// Cross covariance (1/(n-1)) Xcᵀ Yc of two n-row sample matrices.
Matrix cross_covariance(const Matrix& x, const Matrix& y, bool centered = true);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
SymmetricEigen sym_eig(const Matrix& m);

/// Lower-triangular L with L·Lᵀ = m + ridge·I.
/// Throws NotPositiveDefiniteError naming the first non-positive pivot.
Matrix cholesky(const Matrix& m, double ridge = 0.0);

/// Solves L·X = B for lower-triangular L.
Matrix solve_lower(const Matrix& lower, const Matrix& rhs);
/// Solves Lᵀ·X = B for lower-triangular L.
Matrix solve_lower_transposed(const Matrix& lower, const Matrix& rhs);

struct ThinSvd {
  Matrix u;                    // p×r
  std::vector<double> s;       // r, non-negative, descending
  Matrix v;                    // q×r
};

/// Thin SVD m = U·diag(S)·Vᵀ with r = min(p, q), via the smaller Gram matrix.
ThinSvd thin_svd(const Matrix& m);

}  // namespace harfuse::linalg
