#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace pdsm {

using Vector = std::vector<double>;

// Dense row-major matrix. Sizes here are tiny (a handful of queues and
// actions) so this stays deliberately minimal.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix from_rows(const std::vector<Vector>& rows);
  static Matrix from_columns(const std::vector<Vector>& columns);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  Vector column(std::size_t c) const;
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  // y = M x
  Vector multiply(std::span<const double> x) const;
  void multiply(std::span<const double> x, std::span<double> out) const;
  // y = M^T x
  Vector multiply_transpose(std::span<const double> x) const;
  void multiply_transpose(std::span<const double> x, std::span<double> out) const;

  Matrix scaled(double factor) const;
  Matrix transpose() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
double sum(std::span<const double> a);
Vector subtract(std::span<const double> a, std::span<const double> b);
Vector add(std::span<const double> a, std::span<const double> b);
// a += factor * b
void axpy(double factor, std::span<const double> b, std::span<double> a);
// Componentwise max(v, 0).
Vector positive_part(std::span<const double> v);

// Induced 2-norm by power iteration on M^T M, stopped when successive
// estimates agree to `rel_tol`.
double spectral_norm(const Matrix& m, double rel_tol = 1e-10);

}  // namespace pdsm
