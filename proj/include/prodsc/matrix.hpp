#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "prodsc/errors.hpp"

namespace prodsc {

// Dense row-major matrix of 64-bit floats. The universal carrier for X, Z,
// Y, C, G, M and A. All reductions over entries run left-to-right in index
// order so results are identical across platforms.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw ShapeMismatch("matrix data length does not match rows*cols");
  }
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_)
        throw ShapeMismatch("ragged initializer list");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix I(n, n);
    for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// C = A*B, ikj loop order over the row-major storage.
inline Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeMismatch("multiply: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * k;
    double* crow = c.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

// A^T * B without forming the transpose.
inline Matrix multiply_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeMismatch("multiply_at_b: row counts differ");
  Matrix c(a.cols(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t p = 0; p < n; ++p) {
    const double* arow = a.data() + p * k;
    const double* brow = b.data() + p * m;
    for (std::size_t i = 0; i < k; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

// A * B^T without forming the transpose.
inline Matrix multiply_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeMismatch("multiply_a_bt: col counts differ");
  Matrix c(a.rows(), b.rows());
  const std::size_t k = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.data() + i * k;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c(i, j) = s;
    }
  }
  return c;
}

// A += s*B in place.
inline void add_scaled(Matrix& a, double s, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("add_scaled: shapes differ");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += s * pb[i];
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  add_scaled(c, 1.0, b);
  return c;
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  add_scaled(c, -1.0, b);
  return c;
}

inline Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.storage()) v *= s;
  return c;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.storage()) s += v * v;
  return std::sqrt(s);
}

inline double trace(const Matrix& a) {
  if (a.rows() != a.cols()) throw NonSquare("trace: matrix not square");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
  return s;
}

// <A,B> = tr(A^T B)
inline double inner_product(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("inner_product: shapes differ");
  double s = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) s += pa[i] * pb[i];
  return s;
}

// Cholesky factor L (lower) of a symmetric positive definite A.
inline Matrix cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) throw NonSquare("cholesky: matrix not square");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t p = 0; p < j; ++p) diag -= l(j, p) * l(j, p);
    if (diag <= 0.0 || !std::isfinite(diag))
      throw NotPositiveDefinite("cholesky: non-positive pivot");
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

// Solve A X = B with A symmetric positive definite.
inline Matrix solve_spd(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeMismatch("solve_spd: shapes differ");
  const Matrix l = cholesky(a);
  const std::size_t n = a.rows(), m = b.cols();
  Matrix x = b;
  // forward substitution L y = b
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = x(i, j);
      for (std::size_t p = 0; p < i; ++p) s -= l(i, p) * x(p, j);
      x(i, j) = s / l(i, i);
    }
  // back substitution L^T x = y
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = x(ii, j);
      for (std::size_t p = ii + 1; p < n; ++p) s -= l(p, ii) * x(p, j);
      x(ii, j) = s / l(ii, ii);
    }
  }
  return x;
}

inline Matrix symmetrize(const Matrix& a) {
  if (a.rows() != a.cols()) throw NonSquare("symmetrize: matrix not square");
  Matrix s(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

}  // namespace prodsc
