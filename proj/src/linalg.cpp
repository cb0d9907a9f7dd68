#include "pdsm/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "pdsm/errors.hpp"

namespace pdsm {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<Vector> copy;
  for (const auto& r : rows) copy.emplace_back(r);
  return from_rows(copy);
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols_) throw ContractViolation("ragged matrix rows");
    std::copy(rows[r].begin(), rows[r].end(), m.data_.begin() + r * m.cols_);
  }
  return m;
}

Matrix Matrix::from_columns(const std::vector<Vector>& columns) {
  if (columns.empty()) return {};
  Matrix m(columns.front().size(), columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].size() != m.rows_) throw ContractViolation("ragged matrix columns");
    for (std::size_t r = 0; r < m.rows_; ++r) m(r, c) = columns[c][r];
  }
  return m;
}

Vector Matrix::column(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Vector Matrix::multiply(std::span<const double> x) const {
  Vector out(rows_);
  multiply(x, out);
  return out;
}

void Matrix::multiply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != cols_ || out.size() != rows_)
    throw ContractViolation("matrix-vector dimension mismatch");
  for (std::size_t r = 0; r < rows_; ++r) {
    double acc = 0.0;
    const double* row_ptr = data_.data() + r * cols_;
    for (std::size_t c = 0; c < cols_; ++c) acc += row_ptr[c] * x[c];
    out[r] = acc;
  }
}

Vector Matrix::multiply_transpose(std::span<const double> x) const {
  Vector out(cols_);
  multiply_transpose(x, out);
  return out;
}

void Matrix::multiply_transpose(std::span<const double> x, std::span<double> out) const {
  if (x.size() != rows_ || out.size() != cols_)
    throw ContractViolation("matrix-transpose-vector dimension mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double xr = x[r];
    const double* row_ptr = data_.data() + r * cols_;
    for (std::size_t c = 0; c < cols_; ++c) out[c] += row_ptr[c] * xr;
  }
}

Matrix Matrix::scaled(double factor) const {
  Matrix out = *this;
  for (auto& v : out.data_) v *= factor;
  return out;
}

Matrix Matrix::transpose() const {
  Matrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("dot: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

double sum(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v;
  return acc;
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("subtract: dimension mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector add(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("add: dimension mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

void axpy(double factor, std::span<const double> b, std::span<double> a) {
  if (a.size() != b.size()) throw ContractViolation("axpy: dimension mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += factor * b[i];
}

Vector positive_part(std::span<const double> v) {
  Vector out(v.begin(), v.end());
  for (auto& x : out) x = std::max(x, 0.0);
  return out;
}

double spectral_norm(const Matrix& m, double rel_tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  // Start from the all-ones direction perturbed by index so that it is not
  // orthogonal to the leading right singular vector for structured inputs.
  Vector v(m.cols());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i);
  double nv = norm2(v);
  for (auto& x : v) x /= nv;

  Vector mv(m.rows());
  Vector mtmv(m.cols());
  double estimate = 0.0;
  for (int iter = 0; iter < 10000; ++iter) {
    m.multiply(v, mv);
    m.multiply_transpose(mv, mtmv);
    const double n = norm2(mtmv);
    if (n == 0.0) return 0.0;
    const double next = std::sqrt(n);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = mtmv[i] / n;
    if (iter > 0 && std::abs(next - estimate) <= rel_tol * next) return next;
    estimate = next;
  }
  return estimate;
}

}  // namespace pdsm
