#pragma once

#include <cmath>
#include <string>

#include "prodsc/eigen.hpp"
#include "prodsc/matrix.hpp"
#include "prodsc/selfexpress.hpp"

namespace prodsc {

struct HyperParams {
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 1.0;
  std::size_t k = 1;  // cluster count in the block-diagonal regularizer
};

struct LossBreakdown {
  double l1 = 0.0;     // -1/2 log det(I + alpha Z^T Z)
  double l2 = 0.0;     // 1/2 ||Z - ZC||_F^2
  double l3 = 0.0;     // sum of k smallest Laplacian eigenvalues of A
  double total = 0.0;  // l1 + gamma*l2 + beta*l3
};

struct L1Result {
  double value;
  Matrix dZ;
};

// -1/2 log det(I + alpha Z^T Z), evaluated on the smaller Gram side.
// Gradient: -alpha * Z (I + alpha Z^T Z)^{-1} = -alpha (I + alpha Z Z^T)^{-1} Z.
inline L1Result loss_l1(const Matrix& z, double alpha) {
  if (alpha <= 0.0) throw NotPositiveDefinite("loss_l1: alpha must be positive");
  const std::size_t d = z.rows(), n = z.cols();
  const bool left = d <= n;
  Matrix gram = left ? multiply_a_bt(z, z) : multiply_at_b(z, z);
  const double value = -0.5 * logdet_ipg(gram, alpha);

  for (double& v : gram.storage()) v *= alpha;
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += 1.0;
  Matrix dZ;
  if (left) {
    dZ = solve_spd(gram, z);  // (I + alpha ZZ^T)^{-1} Z
  } else {
    dZ = transpose(solve_spd(gram, transpose(z)));  // Z (I + alpha Z^T Z)^{-1}
  }
  for (double& v : dZ.storage()) v *= -alpha;
  return {value, dZ};
}

struct L2Result {
  double value;
  Matrix dZ;
  Matrix dC;
};

inline L2Result loss_l2(const Matrix& z, const Matrix& c) {
  if (c.rows() != c.cols() || z.cols() != c.rows())
    throw ShapeMismatch("loss_l2: Z is d x n, C must be n x n");
  const Matrix zc = multiply(z, c);
  const Matrix r = subtract(z, zc);
  const double value = 0.5 * inner_product(r, r);
  // dZ = R (I-C)^T = R - R C^T
  Matrix dZ = subtract(r, multiply_a_bt(r, c));
  Matrix dC = multiply_at_b(z, r);
  for (double& v : dC.storage()) v = -v;
  return {value, dZ, dC};
}

struct L3Result {
  double value;
  Matrix dA;
  double eigengap;  // gap between the k-th and (k+1)-th Laplacian eigenvalues
};

// Block-diagonal regularizer: sum of the k smallest eigenvalues of the
// Laplacian L = Diag(A 1) - A. The subgradient treats the bottom-k
// eigenvectors U as constants: dA_ij = (UU^T)_ii - (UU^T)_ij.
inline L3Result loss_l3_bd(const Affinity& aff, std::size_t k) {
  const Matrix& a = aff.A;
  const std::size_t n = a.rows();
  if (k > n) throw ShapeMismatch("loss_l3_bd: k exceeds matrix size");
  Matrix lap = scale(a, -1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    lap(i, i) += deg;
  }
  EigenDecomposition eig = sym_eigen(lap);
  double value = 0.0;
  for (std::size_t i = 0; i < k; ++i) value += eig.values[i];

  Matrix uut(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += eig.vectors(i, p) * eig.vectors(j, p);
      uut(i, j) = s;
    }
  Matrix dA(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dA(i, j) = uut(i, i) - uut(i, j);
  const double gap = (k < n) ? eig.values[k] - eig.values[k == 0 ? 0 : k - 1] : 1.0;
  return {value, dA, gap};
}

struct TotalLossResult {
  LossBreakdown parts;
  Matrix dZ;
  Matrix dC;
  bool degenerate_eigengap = false;
};

// Eq-(9)-style composite loss with the chain through A = (|C|+|C^T|)/2.
// The |.| subgradient is 0 at entries that are exactly zero.
inline TotalLossResult total_loss(const Matrix& z, const Matrix& c, const HyperParams& hp) {
  TotalLossResult out;
  L1Result r1 = loss_l1(z, hp.alpha);
  L2Result r2 = loss_l2(z, c);
  out.parts.l1 = r1.value;
  out.parts.l2 = r2.value;

  out.dZ = r1.dZ;
  add_scaled(out.dZ, hp.gamma, r2.dZ);
  out.dC = scale(r2.dC, hp.gamma);

  if (hp.beta != 0.0) {
    CoefficientMatrix cm{c, 0.0, 0};
    const Affinity aff = affinity_from(cm);
    L3Result r3 = loss_l3_bd(aff, hp.k);
    out.parts.l3 = r3.value;
    out.degenerate_eigengap = std::abs(r3.eigengap) < 1e-10;
    const std::size_t n = c.rows();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double cij = c(i, j);
        if (cij == 0.0) continue;
        const double sgn = cij > 0.0 ? 1.0 : -1.0;
        out.dC(i, j) += hp.beta * sgn * 0.5 * (r3.dA(i, j) + r3.dA(j, i));
      }
  }
  out.parts.total = out.parts.l1 + hp.gamma * out.parts.l2 + hp.beta * out.parts.l3;
  return out;
}

enum class RegularizerTag { L1, Frobenius, Nuclear, None };

struct RegResult {
  double value;
  Matrix dC;
};

inline RegResult alt_regularizers(const Matrix& c, RegularizerTag tag) {
  RegResult out{0.0, Matrix(c.rows(), c.cols())};
  switch (tag) {
    case RegularizerTag::None:
      break;
    case RegularizerTag::L1:
      for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j) {
          out.value += std::abs(c(i, j));
          out.dC(i, j) = c(i, j) > 0.0 ? 1.0 : (c(i, j) < 0.0 ? -1.0 : 0.0);
        }
      break;
    case RegularizerTag::Frobenius:
      for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j) {
          out.value += c(i, j) * c(i, j);
          out.dC(i, j) = 2.0 * c(i, j);
        }
      break;
    case RegularizerTag::Nuclear: {
      SvdDecomposition s = svd(c);
      const double tiny = 1e-12 * std::max(1.0, s.singular_values.empty() ? 0.0 : s.singular_values[0]);
      for (double sv : s.singular_values) out.value += sv;
      // subgradient U V^T over the nonzero spectrum
      for (std::size_t p = 0; p < s.singular_values.size(); ++p) {
        if (s.singular_values[p] <= tiny) continue;
        for (std::size_t i = 0; i < c.rows(); ++i)
          for (std::size_t j = 0; j < c.cols(); ++j)
            out.dC(i, j) += s.left(i, p) * s.right(j, p);
      }
      break;
    }
  }
  return out;
}

struct SedscResult {
  double value;
  Matrix dZ;
  Matrix dC;
};

// Baseline self-expressive objective: 1/2 ||Z - ZC||_F^2 + beta * r(C).
inline SedscResult sedsc_loss(const Matrix& z, const Matrix& c, double beta, RegularizerTag r_tag) {
  L2Result r2 = loss_l2(z, c);
  SedscResult out{r2.value, r2.dZ, r2.dC};
  if (beta != 0.0 && r_tag != RegularizerTag::None) {
    RegResult rr = alt_regularizers(c, r_tag);
    out.value += beta * rr.value;
    add_scaled(out.dC, beta, rr.dC);
  }
  return out;
}

}  // namespace prodsc
