#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "prodsc/matrix.hpp"

namespace prodsc {

// Eigenvalues ascending; columns of `vectors` are the matching orthonormal
// eigenvectors.
struct EigenDecomposition {
  std::vector<double> values;
  Matrix vectors;
};

// Singular values descending; `left` is d x r, `right` is n x r with
// orthonormal columns, A = left * diag(s) * right^T.
struct SvdDecomposition {
  std::vector<double> singular_values;
  Matrix left;
  Matrix right;
};

namespace detail {

// Householder reduction of symmetric `a` (overwritten) to tridiagonal form;
// diagonal into d, subdiagonal into e[1..n-1], and the accumulated orthogonal
// transform replaces `a`.
inline void tridiagonalize(Matrix& a, std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = a.rows();
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (std::size_t i = n; i-- > 1;) {
    const std::size_t l = i - 1;
    double h = 0.0;
    if (l > 0) {
      double scale = 0.0;
      for (std::size_t k = 0; k <= l; ++k) scale += std::abs(a(i, k));
      if (scale == 0.0) {
        e[i] = a(i, l);
      } else {
        for (std::size_t k = 0; k <= l; ++k) {
          a(i, k) /= scale;
          h += a(i, k) * a(i, k);
        }
        double f = a(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        a(i, l) = f - g;
        f = 0.0;
        for (std::size_t j = 0; j <= l; ++j) {
          a(j, i) = a(i, j) / h;
          g = 0.0;
          for (std::size_t k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
          for (std::size_t k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
          e[j] = g / h;
          f += e[j] * a(i, j);
        }
        const double hh = f / (h + h);
        for (std::size_t j = 0; j <= l; ++j) {
          f = a(i, j);
          e[j] = g = e[j] - hh * f;
          for (std::size_t k = 0; k <= j; ++k) a(j, k) -= f * e[k] + g * a(i, k);
        }
      }
    } else {
      e[i] = a(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  // accumulate the transformation
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] != 0.0) {
      for (std::size_t j = 0; j < i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k < i; ++k) g += a(i, k) * a(k, j);
        for (std::size_t k = 0; k < i; ++k) a(k, j) -= g * a(k, i);
      }
    }
    d[i] = a(i, i);
    a(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i) = 0.0;
  }
}

inline double hypot2(double x, double y) {
  const double ax = std::abs(x), ay = std::abs(y);
  if (ax > ay) {
    const double r = ay / ax;
    return ax * std::sqrt(1.0 + r * r);
  }
  if (ay == 0.0) return 0.0;
  const double r = ax / ay;
  return ay * std::sqrt(1.0 + r * r);
}

// Implicit-shift QL on a symmetric tridiagonal matrix (d diagonal,
// e subdiagonal in e[1..n-1]); eigenvectors accumulated into z.
inline void tql_implicit(std::vector<double>& d, std::vector<double>& e, Matrix& z) {
  const std::size_t n = d.size();
  if (n == 0) return;
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= 1e-300 || std::abs(e[m]) <= 2.3e-16 * dd) break;
      }
      if (m != l) {
        if (iter++ == 50) throw NotConverged("sym_eigen: QL iteration budget exhausted");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = hypot2(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          r = hypot2(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (std::size_t k = 0; k < n; ++k) {
            f = z(k, i + 1);
            z(k, i + 1) = s * z(k, i) + c * f;
            z(k, i) = c * z(k, i) - s * f;
          }
        }
        if (r == 0.0 && m - l > 1) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace detail

// Symmetric eigensolver: Householder tridiagonalization followed by
// implicit-shift QL with accumulated eigenvectors. Deterministic.
inline EigenDecomposition sym_eigen(const Matrix& input) {
  if (input.rows() != input.cols()) throw NonSquare("sym_eigen: matrix not square");
  const std::size_t n = input.rows();
  Matrix a = symmetrize(input);
  std::vector<double> d, e;
  detail::tridiagonalize(a, d, e);
  detail::tql_implicit(d, e, a);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return d[i] < d[j]; });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = d[order[j]];
    // deterministic sign convention: largest-magnitude entry is positive
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = std::abs(a(i, order[j]));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    const double sgn = a(arg, order[j]) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = sgn * a(i, order[j]);
  }
  return out;
}

// SVD via eigendecomposition of the smaller Gram matrix. Singular vectors
// for near-zero modes are completed by Gram-Schmidt against the resolved
// columns.
inline SvdDecomposition svd(const Matrix& a) {
  const std::size_t d = a.rows(), n = a.cols();
  const std::size_t r = std::min(d, n);
  const bool gram_left = d <= n;  // use AA^T when d <= n, else A^T A

  const Matrix gram = gram_left ? multiply_a_bt(a, a) : multiply_at_b(a, a);
  EigenDecomposition eig = sym_eigen(gram);

  SvdDecomposition out;
  out.singular_values.resize(r);
  out.left = Matrix(d, r);
  out.right = Matrix(n, r);
  const std::size_t m = gram.rows();
  const double smax = std::sqrt(std::max(eig.values.back(), 0.0));
  const double tiny = std::max(smax, 1.0) * 1e-13;

  // Descending order: take eigenpairs from the top.
  for (std::size_t j = 0; j < r; ++j) {
    const std::size_t src = m - 1 - j;
    const double sigma = std::sqrt(std::max(eig.values[src], 0.0));
    out.singular_values[j] = sigma;
    Matrix& primary = gram_left ? out.left : out.right;
    for (std::size_t i = 0; i < primary.rows(); ++i) primary(i, j) = eig.vectors(i, src);
  }

  // Back-substitute the other factor: V = A^T U / sigma (or U = A V / sigma).
  Matrix& primary = gram_left ? out.left : out.right;
  Matrix& secondary = gram_left ? out.right : out.left;
  const Matrix prod = gram_left ? multiply_at_b(a, primary) : multiply(a, primary);
  for (std::size_t j = 0; j < r; ++j) {
    const double sigma = out.singular_values[j];
    if (sigma > tiny) {
      for (std::size_t i = 0; i < secondary.rows(); ++i) secondary(i, j) = prod(i, j) / sigma;
    } else {
      // null mode: fill with a unit vector orthogonal to the earlier columns
      const std::size_t rows = secondary.rows();
      std::vector<double> cand(rows, 0.0);
      for (std::size_t trial = 0; trial < rows; ++trial) {
        std::fill(cand.begin(), cand.end(), 0.0);
        cand[trial] = 1.0;
        for (std::size_t p = 0; p < j; ++p) {
          double dot = 0.0;
          for (std::size_t i = 0; i < rows; ++i) dot += cand[i] * secondary(i, p);
          for (std::size_t i = 0; i < rows; ++i) cand[i] -= dot * secondary(i, p);
        }
        double nrm = 0.0;
        for (double vv : cand) nrm += vv * vv;
        nrm = std::sqrt(nrm);
        if (nrm > 0.5) {
          for (std::size_t i = 0; i < rows; ++i) secondary(i, j) = cand[i] / nrm;
          break;
        }
      }
    }
  }
  return out;
}

// log det(I + alpha*G) for symmetric PSD G, via Cholesky of I + alpha*G.
inline double logdet_ipg(const Matrix& g, double alpha) {
  if (g.rows() != g.cols()) throw NonSquare("logdet_ipg: matrix not square");
  if (alpha <= 0.0) throw NotPositiveDefinite("logdet_ipg: alpha must be positive");
  Matrix m = symmetrize(g);
  for (double& v : m.storage()) v *= alpha;
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += 1.0;
  const Matrix l = cholesky(m);
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

}  // namespace prodsc
