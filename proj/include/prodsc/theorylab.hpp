#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "prodsc/eigen.hpp"
#include "prodsc/matrix.hpp"
#include "prodsc/objective.hpp"
#include "prodsc/rng.hpp"
#include "prodsc/selfexpress.hpp"

namespace prodsc {

// Optimal Gram spectrum of the Z-subproblem: the reverse water-filling
// solution lambda_G^(i) = max{0, 1/(nu + gamma*lambda_M^(i)) - 1/alpha}.
struct WaterfillSolution {
  std::vector<double> lambda_G;
  double nu = 0.0;
  std::size_t rank = 0;
  std::vector<double> sigma_Z;
};

struct ClusterArrangement {
  std::vector<std::size_t> permutation;  // position -> column index
  std::vector<std::size_t> block_sizes;
};

namespace detail {

inline double waterfill_budget(const std::vector<double>& lambda_m, double nu, double alpha,
                               std::size_t r, double gamma) {
  double s = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double den = nu + gamma * lambda_m[i];
    if (den <= 0.0) return std::numeric_limits<double>::infinity();
    s += std::max(0.0, 1.0 / den - 1.0 / alpha);
  }
  return s;
}

}  // namespace detail

inline WaterfillSolution waterfill(std::vector<double> lambda_m, double alpha, double gamma,
                                   std::size_t d, std::size_t n) {
  const std::size_t r = std::min(d, n);
  if (lambda_m.size() < r) throw InfeasibleBracket("waterfill: need at least min{d,N} eigenvalues");
  if (alpha <= 0.0 || gamma <= 0.0) throw InfeasibleBracket("waterfill: alpha, gamma must be positive");
  lambda_m.resize(r);
  std::sort(lambda_m.begin(), lambda_m.end());
  const double target = static_cast<double>(n);

  // g(nu) = sum_i max{0, 1/(nu+gamma*lambda_i) - 1/alpha} - N is strictly
  // decreasing; bracket between the pole and a geometrically grown upper end.
  double lo = -gamma * lambda_m.front() + 1e-12;
  double hi = std::max(alpha, 1.0);
  double g_hi = detail::waterfill_budget(lambda_m, hi, alpha, r, gamma) - target;
  int grow = 0;
  while (g_hi > 0.0) {
    hi *= 2.0;
    g_hi = detail::waterfill_budget(lambda_m, hi, alpha, r, gamma) - target;
    if (++grow > 200) throw InfeasibleBracket("waterfill: upper bracket not found");
  }
  double g_lo = detail::waterfill_budget(lambda_m, lo, alpha, r, gamma) - target;
  int nudge = 0;
  while (!(g_lo > 0.0)) {
    // pole offset landed past the crossing (tiny gamma*lambda spread)
    lo = lo - std::max(1e-12, std::abs(lo)) * 0.5 - 1e-12;
    if (lo <= -gamma * lambda_m.front()) throw InfeasibleBracket("waterfill: lower bracket not found");
    g_lo = detail::waterfill_budget(lambda_m, lo, alpha, r, gamma) - target;
    if (++nudge > 200) throw InfeasibleBracket("waterfill: lower bracket not found");
  }

  // run the bisection to interval exhaustion: stopping at a loose budget
  // residual would leave nu errors that the 1/(nu+gamma*lambda)^2
  // sensitivity amplifies into visible lambda_G errors
  double nu = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    nu = 0.5 * (lo + hi);
    if (nu <= lo || nu >= hi) break;  // interval below double resolution
    const double g = detail::waterfill_budget(lambda_m, nu, alpha, r, gamma) - target;
    if (g == 0.0) break;
    if (g > 0.0)
      lo = nu;
    else
      hi = nu;
  }

  WaterfillSolution sol;
  sol.nu = nu;
  sol.lambda_G.resize(r);
  sol.sigma_Z.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    sol.lambda_G[i] = std::max(0.0, 1.0 / (nu + gamma * lambda_m[i]) - 1.0 / alpha);
    sol.sigma_Z[i] = std::sqrt(sol.lambda_G[i]);
    if (sol.lambda_G[i] > 1e-10) ++sol.rank;
  }
  return sol;
}

// Noncollapse bound on gamma: alpha^2 / (lambda_max(M) * (alpha + min{d/N,1})).
inline double collapse_threshold(double alpha, std::size_t d, std::size_t n, double lambda_max_m) {
  const double ratio = std::min(static_cast<double>(d) / static_cast<double>(n), 1.0);
  return alpha * alpha / (lambda_max_m * (alpha + ratio));
}

// ||GM - MG||_F
inline double alignment_error(const Matrix& g, const Matrix& m) {
  if (!g.same_shape(m) || g.rows() != g.cols())
    throw ShapeMismatch("alignment_error: need equal square shapes");
  const Matrix gm = multiply(g, m);
  const Matrix mg = multiply(m, g);
  return frobenius_norm(subtract(gm, mg));
}

// <u_j, G u_j / ||G u_j||> for the eigenvectors of M in ascending order;
// zero modes of G report 0.
inline std::vector<double> eigen_correlation(const Matrix& g, const Matrix& m) {
  if (!g.same_shape(m) || g.rows() != g.cols())
    throw ShapeMismatch("eigen_correlation: need equal square shapes");
  const std::size_t n = m.rows();
  EigenDecomposition eig = sym_eigen(m);
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> gu(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < n; ++p) gu[i] += g(i, p) * eig.vectors(p, j);
    double nrm = 0.0;
    for (double v : gu) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm <= 1e-12) continue;
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += eig.vectors(i, j) * gu[i];
    out[j] = dot / nrm;
  }
  return out;
}

// <(I-C)(I-C)^T, G - G*> with columns arranged into contiguous blocks.
inline double csc_value(const Matrix& z, const Matrix& c, const ClusterArrangement& arr) {
  const std::size_t n = z.cols();
  if (c.rows() != n || c.cols() != n) throw ShapeMismatch("csc_value: C must be N x N");
  if (arr.permutation.size() != n) throw BadArrangement("csc_value: permutation length != N");
  std::size_t total = 0;
  for (std::size_t b : arr.block_sizes) total += b;
  if (total != n) throw BadArrangement("csc_value: block sizes do not sum to N");
  std::vector<bool> seen(n, false);
  for (std::size_t p : arr.permutation) {
    if (p >= n || seen[p]) throw BadArrangement("csc_value: permutation is not a bijection");
    seen[p] = true;
  }

  Matrix zp(z.rows(), n);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t i = 0; i < z.rows(); ++i) zp(i, t) = z(i, arr.permutation[t]);
  Matrix cp(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cp(i, j) = c(arr.permutation[i], arr.permutation[j]);

  const Matrix gram = multiply_at_b(zp, zp);
  const Matrix m = m_matrix(cp);

  // G - G* zeroes the in-block entries, so sum M .* G over off-block pairs
  std::vector<std::size_t> block_of(n);
  std::size_t pos = 0, bi = 0;
  for (std::size_t b : arr.block_sizes) {
    for (std::size_t t = 0; t < b; ++t) block_of[pos++] = bi;
    ++bi;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (block_of[i] != block_of[j]) s += m(i, j) * gram(i, j);
  return s;
}

struct SedscOptimal {
  Matrix Z;
  double objective;
};

// Analytic minimizer of the unregularized baseline with C fixed: all d rows
// lie along the bottom eigenvector of M, split evenly to spend ||Z||_F^2 = N.
inline SedscOptimal sedsc_optimal_rows(const Matrix& c, std::size_t d, std::size_t n) {
  if (c.rows() != c.cols() || c.rows() != n) throw ShapeMismatch("sedsc_optimal_rows: C must be N x N");
  const Matrix m = m_matrix(c);
  EigenDecomposition eig = sym_eigen(m);
  const double lambda_min = eig.values.front();
  SedscOptimal out{Matrix(d, n), 0.5 * static_cast<double>(n) * lambda_min};
  const double rowscale = std::sqrt(static_cast<double>(n) / static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j) out.Z(i, j) = rowscale * eig.vectors(j, 0);
  return out;
}

namespace detail {

inline double z_objective(const Matrix& z, const Matrix& m, double alpha, double gamma) {
  const std::size_t d = z.rows(), n = z.cols();
  const Matrix gram = d <= n ? multiply_a_bt(z, z) : multiply_at_b(z, z);
  const double l1 = -0.5 * logdet_ipg(gram, alpha);
  const Matrix zm = multiply(z, m);
  return l1 + 0.5 * gamma * inner_product(z, zm);
}

inline void renormalize_sphere(Matrix& z, double n) {
  const double nrm = frobenius_norm(z);
  const double s = std::sqrt(n) / nrm;
  for (double& v : z.storage()) v *= s;
}

}  // namespace detail

struct ZSubproblemResult {
  Matrix Z;
  std::vector<double> sigma;  // singular values, descending
};

// Projected gradient descent on the Z-subproblem with renormalization onto
// ||Z||_F^2 = N after every step. Step size starts at the Lipschitz-style
// bound 1/(alpha + gamma*lambda_max(M)) and adapts by halving/growing.
inline ZSubproblemResult solve_z_subproblem(const Matrix& c, double alpha, double gamma,
                                            std::size_t d, std::size_t iters, RngState& rng) {
  const std::size_t n = c.rows();
  if (c.cols() != n) throw NonSquare("solve_z_subproblem: C must be square");
  const Matrix m = m_matrix(c);
  EigenDecomposition me = sym_eigen(m);
  const double lam_max = std::max(me.values.back(), 0.0);

  Matrix z = rng.gaussian_matrix(d, n);
  detail::renormalize_sphere(z, static_cast<double>(n));
  double step = 1.0 / (alpha + gamma * lam_max);
  double f = detail::z_objective(z, m, alpha, gamma);

  for (std::size_t it = 0; it < iters; ++it) {
    L1Result l1 = loss_l1(z, alpha);
    Matrix grad = multiply(z, m);
    for (std::size_t i = 0; i < grad.size(); ++i)
      grad.storage()[i] = l1.dZ.storage()[i] + gamma * grad.storage()[i];

    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      Matrix trial = z;
      add_scaled(trial, -step, grad);
      detail::renormalize_sphere(trial, static_cast<double>(n));
      const double f_trial = detail::z_objective(trial, m, alpha, gamma);
      if (f_trial <= f) {
        z = std::move(trial);
        f = f_trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stationary within float resolution
    step *= 1.1;
  }

  SvdDecomposition s = svd(z);
  return {std::move(z), std::move(s.singular_values)};
}

struct SedscDescent {
  Matrix Z;
  double objective;
};

// Gradient minimization of 1/2||Z - ZC||_F^2 on the sphere ||Z||_F^2 = N.
inline SedscDescent sedsc_minimize(const Matrix& c, std::size_t d, std::size_t iters, RngState& rng) {
  const std::size_t n = c.rows();
  const Matrix m = m_matrix(c);
  EigenDecomposition me = sym_eigen(m);
  const double lam_max = std::max(me.values.back(), 1e-12);

  Matrix z = rng.gaussian_matrix(d, n);
  detail::renormalize_sphere(z, static_cast<double>(n));
  const double step = 1.0 / lam_max;
  for (std::size_t it = 0; it < iters; ++it) {
    Matrix grad = multiply(z, m);
    add_scaled(z, -step, grad);
    detail::renormalize_sphere(z, static_cast<double>(n));
  }
  const Matrix zm = multiply(z, m);
  const double obj = 0.5 * inner_product(z, zm);
  return {std::move(z), obj};
}

}  // namespace prodsc
