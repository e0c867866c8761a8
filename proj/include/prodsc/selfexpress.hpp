#pragma once

#include <cmath>
#include <vector>

#include "prodsc/matrix.hpp"

namespace prodsc {

// d x n_b matrix with unit-norm columns.
struct EmbeddingBatch {
  Matrix Y;
};

// Doubly-stochastic self-expressive matrix with exact zero diagonal.
struct CoefficientMatrix {
  Matrix C;
  double tau = 0.1;
  std::size_t iters = 30;
};

struct Affinity {
  Matrix A;
};

inline EmbeddingBatch normalize_columns(const Matrix& raw) {
  EmbeddingBatch out{raw};
  for (std::size_t j = 0; j < raw.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < raw.rows(); ++i) s += raw(i, j) * raw(i, j);
    const double nrm = std::sqrt(s);
    if (nrm < 1e-12) throw ZeroColumn(j);
    for (std::size_t i = 0; i < raw.rows(); ++i) out.Y(i, j) = raw(i, j) / nrm;
  }
  return out;
}

// Intermediates of the unrolled Sinkhorn iteration, retained so the trainer
// can run the exact backward pass through every normalization step.
struct SinkhornCache {
  double tau = 0.1;
  bool mask_diag = true;
  Matrix kernel;                         // masked kernel before normalization
  std::vector<Matrix> step_out;          // matrix after each half-step
  std::vector<std::vector<double>> sums; // row/col sums used by each half-step
  std::vector<bool> step_is_row;
};

// Alternating row/column normalization of exp(S/tau). The kernel is shifted
// by the global max of S before exponentiation; a global scale cancels in
// the first row normalization, so the result and its gradient are exact.
inline CoefficientMatrix sinkhorn_project(const Matrix& s, double tau, std::size_t iters,
                                          bool mask_diag, SinkhornCache* cache = nullptr) {
  if (s.rows() != s.cols()) throw NonSquare("sinkhorn_project: matrix not square");
  if (tau <= 0.0) throw NumericalOverflow("sinkhorn_project: tau must be positive");
  if (iters < 1) throw Error("sinkhorn_project: iters must be >= 1");
  const std::size_t n = s.rows();
  if (mask_diag && n < 2) throw BatchTooSmall("sinkhorn_project: need n >= 2 with masked diagonal");

  double smax = s(0, 0);
  for (double v : s.storage()) smax = std::max(smax, v);

  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (mask_diag && i == j) continue;
      const double e = (s(i, j) - smax) / tau;
      if (e > 700.0) throw NumericalOverflow("sinkhorn_project: kernel overflow, raise tau");
      k(i, j) = std::exp(e);
    }

  if (cache) {
    cache->tau = tau;
    cache->mask_diag = mask_diag;
    cache->kernel = k;
    cache->step_out.clear();
    cache->sums.clear();
    cache->step_is_row.clear();
  }

  for (std::size_t it = 0; it < iters; ++it) {
    for (int phase = 0; phase < 2; ++phase) {
      const bool row = (phase == 0);
      std::vector<double> sum(n, 0.0);
      if (row) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) sum[i] += k(i, j);
      } else {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) sum[j] += k(i, j);
      }
      for (std::size_t i = 0; i < n; ++i)
        if (sum[i] <= 1e-300)
          throw NumericalOverflow("sinkhorn_project: empty marginal, raise tau");
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) k(i, j) /= sum[row ? i : j];
      if (cache) {
        cache->step_out.push_back(k);
        cache->sums.push_back(std::move(sum));
        cache->step_is_row.push_back(row);
      }
    }
  }
  return CoefficientMatrix{k, tau, iters};
}

// Exact gradient through the unrolled iteration: dL/dS from dL/dC.
inline Matrix sinkhorn_backward(const SinkhornCache& cache, const Matrix& dC) {
  const std::size_t n = dC.rows();
  Matrix g = dC;
  for (std::size_t step = cache.step_out.size(); step-- > 0;) {
    const Matrix& out = cache.step_out[step];
    const std::vector<double>& sum = cache.sums[step];
    const bool row = cache.step_is_row[step];
    if (row) {
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g(i, j) * out(i, j);
        for (std::size_t j = 0; j < n; ++j) g(i, j) = (g(i, j) - dot) / sum[i];
      }
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += g(i, j) * out(i, j);
        for (std::size_t i = 0; i < n; ++i) g(i, j) = (g(i, j) - dot) / sum[j];
      }
    }
  }
  // through the exponential kernel; masked diagonal carries no gradient
  Matrix dS(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (cache.mask_diag && i == j) continue;
      dS(i, j) = g(i, j) * cache.kernel(i, j) / cache.tau;
    }
  return dS;
}

inline Affinity affinity_from(const CoefficientMatrix& c) {
  const Matrix& m = c.C;
  Affinity a{Matrix(m.rows(), m.cols())};
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      a.A(i, j) = 0.5 * (std::abs(m(i, j)) + std::abs(m(j, i)));
  return a;
}

// M = (I - C)(I - C)^T
inline Matrix m_matrix(const Matrix& c) {
  if (c.rows() != c.cols()) throw NonSquare("m_matrix: matrix not square");
  Matrix imc = scale(c, -1.0);
  for (std::size_t i = 0; i < imc.rows(); ++i) imc(i, i) += 1.0;
  return multiply_a_bt(imc, imc);
}

}  // namespace prodsc
