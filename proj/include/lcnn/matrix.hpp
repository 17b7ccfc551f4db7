#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcnn {

/// Thrown when an operation is given inputs of the wrong shape or outside its
/// domain. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown on NaN, divergence, or solver non-convergence. The CLI maps this to
/// exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> v);
  static Matrix column_vector(std::span<const double> v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix transpose() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// Matrix product. Throws ValidationError when a.cols() != b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
Vector matvec_t(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Stacks a on top of b (column counts must agree).
Matrix vstack(const Matrix& a, const Matrix& b);
/// Block-diagonal [[a, 0], [0, b]].
Matrix block_diag(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& w);

/// Raised by spectral_norm when power iteration does not settle within the
/// iteration budget. Carries the final estimate.
class PowerIterationError : public NumericalError {
 public:
  PowerIterationError(const std::string& what, double last_estimate)
      : NumericalError(what), last_estimate_(last_estimate) {}
  double last_estimate() const { return last_estimate_; }

 private:
  double last_estimate_;
};

struct PowerIterationOptions {
  double tol = 1e-9;
  int max_iter = 500;
};

/// Largest singular value via power iteration on WᵀW, started from the
/// normalised all-ones vector. Converged when successive estimates differ by
/// at most tol·max(1, σ).
///
/// Throws ValidationError for an all-zero matrix and PowerIterationError when
/// the budget is exhausted.
double spectral_norm(const Matrix& w, const PowerIterationOptions& opts = {});

/// Singular values (descending) by one-sided Jacobi rotations.
Vector singular_values(const Matrix& w);

/// σ_max that never throws on slow convergence: power iteration first, then a
/// full Jacobi SVD if the iteration stalls.
double spectral_norm_robust(const Matrix& w, const PowerIterationOptions& opts = {});

}  // namespace lcnn
