#pragma once

// Executable checks shared by the acceptance binary and the `verify` CLI
// subcommand. Each check returns a CheckResult with a one-line summary;
// oracle computations here are deliberately independent of the library
// implementations they cross-examine.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "prodsc/clustering.hpp"
#include "prodsc/dataio.hpp"
#include "prodsc/objective.hpp"
#include "prodsc/selfexpress.hpp"
#include "prodsc/theorylab.hpp"
#include "prodsc/trainer.hpp"

namespace prodsc {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace verify_detail {

inline double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

inline std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

// Euclidean projection onto the scaled simplex {x >= 0, sum x = total}.
inline void project_simplex(std::vector<double>& v, double total) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  std::size_t rho = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    css += u[i];
    const double t = (css - total) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = i + 1;
      theta = t;
    }
  }
  if (rho == 0) {  // fallback: uniform
    std::fill(v.begin(), v.end(), total / static_cast<double>(v.size()));
    return;
  }
  for (double& x : v) x = std::max(0.0, x - theta);
}

// First-order oracle for the spectral-domain program: minimize
//   F(lam) = sum_i [ -1/2 log(1 + alpha lam_i) + (gamma/2) mu_i lam_i ]
// over the scaled simplex, by accelerated projected gradient with restarts.
inline std::vector<double> spectral_program_oracle(const std::vector<double>& mu, double alpha,
                                                   double gamma, double total,
                                                   std::size_t iters = 5000) {
  const std::size_t r = mu.size();
  std::vector<double> x(r, total / static_cast<double>(r));
  std::vector<double> y = x, x_prev = x, grad(r);
  const double step = 2.0 / (alpha * alpha);  // 1/L for the log term's curvature
  double t_mom = 1.0;
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < r; ++i)
      grad[i] = -0.5 * alpha / (1.0 + alpha * y[i]) + 0.5 * gamma * mu[i];
    std::vector<double> x_new = y;
    for (std::size_t i = 0; i < r; ++i) x_new[i] -= step * grad[i];
    project_simplex(x_new, total);
    // gradient-based momentum restart: function values flatten out below
    // double precision long before the iterate converges, so test the
    // ascent direction instead
    double ascent = 0.0;
    for (std::size_t i = 0; i < r; ++i) ascent += grad[i] * (x_new[i] - x[i]);
    if (ascent > 0.0) {
      t_mom = 1.0;
      y = x;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
    y = x_new;
    const double mix = (t_mom - 1.0) / t_next;
    for (std::size_t i = 0; i < r; ++i) y[i] += mix * (x_new[i] - x_prev[i]);
    t_mom = t_next;
    x_prev = x;
    x = x_new;
  }
  // Polish with exact pairwise transfers: moving mass t from j to i keeps
  // the simplex constraint; the optimal t solves f_i'(x_i+t) = f_j'(x_j-t),
  // a monotone 1-d root found by bisection. A few sweeps drive the KKT
  // residual to machine precision without touching any dual formula.
  auto fprime = [&](std::size_t i, double v) {
    return -0.5 * alpha / (1.0 + alpha * v) + 0.5 * gamma * mu[i];
  };
  for (int sweep = 0; sweep < 6; ++sweep) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = i + 1; j < r; ++j) {
        double lo = -x[i], hi = x[j];
        auto h = [&](double t) { return fprime(i, x[i] + t) - fprime(j, x[j] - t); };
        if (h(lo) >= 0.0) {  // best move: push everything from i to j
          x[j] += x[i];
          x[i] = 0.0;
          continue;
        }
        if (h(hi) <= 0.0) {
          x[i] += x[j];
          x[j] = 0.0;
          continue;
        }
        for (int b = 0; b < 100; ++b) {
          const double mid = 0.5 * (lo + hi);
          if (mid <= lo || mid >= hi) break;
          if (h(mid) < 0.0)
            lo = mid;
          else
            hi = mid;
        }
        const double t_star = 0.5 * (lo + hi);
        x[i] += t_star;
        x[j] -= t_star;
      }
  }
  return x;
}

// Random problem instance shared by the water-filling checks.
struct WfInstance {
  std::size_t d, n;
  double alpha, gamma;
  std::vector<double> lambda_m;  // ascending, min{d,n} entries
};

inline WfInstance random_wf_instance(RngState& rng) {
  WfInstance w;
  w.d = 2 + rng.next_index(63);
  w.n = 2 + rng.next_index(63);
  const std::size_t r = std::min(w.d, w.n);
  w.alpha = 0.05 + 0.95 * rng.uniform();
  w.gamma = 0.01 + rng.uniform();
  w.lambda_m.resize(r);
  for (double& v : w.lambda_m) v = std::abs(rng.gaussian());
  std::sort(w.lambda_m.begin(), w.lambda_m.end());
  return w;
}

}  // namespace verify_detail

// --- water-filling vs first-order oracle ---------------------------------
inline CheckResult check_waterfill_oracle() {
  RngState rng(101);
  double worst = 0.0, worst_budget = 0.0;
  const double t0 = verify_detail::now_seconds();
  for (int t = 0; t < 100; ++t) {
    verify_detail::WfInstance w = verify_detail::random_wf_instance(rng);
    WaterfillSolution sol = waterfill(w.lambda_m, w.alpha, w.gamma, w.d, w.n);
    std::vector<double> oracle = verify_detail::spectral_program_oracle(
        w.lambda_m, w.alpha, w.gamma, static_cast<double>(w.n));
    double budget = 0.0;
    for (std::size_t i = 0; i < sol.lambda_G.size(); ++i) {
      worst = std::max(worst, std::abs(sol.lambda_G[i] - oracle[i]));
      budget += sol.lambda_G[i];
    }
    worst_budget = std::max(worst_budget, std::abs(budget - static_cast<double>(w.n)));
  }
  const double secs = verify_detail::now_seconds() - t0;
  CheckResult r;
  r.name = "waterfill-matches-first-order-oracle";
  r.pass = worst <= 1e-6 && worst_budget <= 1e-8 && secs < 10.0;
  r.detail = verify_detail::fmt("max|dLambda|=%.3g max|sum-N|=%.3g time=%.2fs", worst, worst_budget,
                                secs);
  return r;
}

// --- nu-star residual and dual bound -------------------------------------
inline CheckResult check_nu_residual_and_bound() {
  RngState rng(101);  // same instance stream as the oracle check
  double worst_res = 0.0, worst_gap = -1e300;
  for (int t = 0; t < 100; ++t) {
    verify_detail::WfInstance w = verify_detail::random_wf_instance(rng);
    WaterfillSolution sol = waterfill(w.lambda_m, w.alpha, w.gamma, w.d, w.n);
    const std::size_t r = std::min(w.d, w.n);
    const double res =
        detail::waterfill_budget(w.lambda_m, sol.nu, w.alpha, r, w.gamma) - static_cast<double>(w.n);
    worst_res = std::max(worst_res, std::abs(res));
    const double bound = 1.0 / (static_cast<double>(w.n) / static_cast<double>(r) + 1.0 / w.alpha) -
                         w.gamma * w.lambda_m.front();
    worst_gap = std::max(worst_gap, sol.nu - bound);  // must stay <= 0
  }
  CheckResult out;
  out.name = "nu-star-residual-and-dual-bound";
  out.pass = worst_res <= 1e-9 && worst_gap <= 1e-12;
  out.detail = verify_detail::fmt("max|g(nu)|=%.3g max(nu-bound)=%.3g", worst_res, worst_gap);
  return out;
}

// --- collapse phase transition -------------------------------------------
inline CheckResult check_phase_transition() {
  RngState rng(202);
  bool all_ok = true;
  double worst_min = 1e300;
  const double t0 = verify_detail::now_seconds();
  for (int t = 0; t < 50; ++t) {
    verify_detail::WfInstance w = verify_detail::random_wf_instance(rng);
    const double thr = collapse_threshold(w.alpha, w.d, w.n, w.lambda_m.back());
    for (double frac : {0.1, 0.5, 0.9, 0.99, 1.5, 3.0}) {
      const double gamma = frac * thr;
      WaterfillSolution sol = waterfill(w.lambda_m, w.alpha, gamma, w.d, w.n);
      double mn = 1e300;
      for (double v : sol.lambda_G) mn = std::min(mn, v);
      if (gamma < thr) {
        worst_min = std::min(worst_min, mn);
        if (mn <= 1e-10) all_ok = false;
      }
    }
  }
  const double secs = verify_detail::now_seconds() - t0;
  CheckResult out;
  out.name = "collapse-phase-transition";
  out.pass = all_ok && secs < 30.0;
  out.detail = verify_detail::fmt("min lambda_G below threshold=%.3g time=%.2fs", worst_min, secs);
  return out;
}

// --- singular-value formula ----------------------------------------------
inline CheckResult check_sigma_formula() {
  RngState rng(303);
  double worst = 0.0;
  int done = 0;
  for (int t = 0; done < 10 && t < 40; ++t) {
    const std::size_t n = 16, d = 4;
    Matrix c = rng.gaussian_matrix(n, n);
    for (double& v : c.storage()) v *= 0.15;
    const Matrix m = m_matrix(c);
    EigenDecomposition me = sym_eigen(m);
    const double alpha = 0.5 + rng.uniform();
    const double thr = collapse_threshold(alpha, d, n, me.values.back());
    const double gamma = 0.5 * thr;  // safely inside the noncollapse region
    WaterfillSolution wf = waterfill(me.values, alpha, gamma, d, n);
    RngState sub = rng.split(1000 + t);
    ZSubproblemResult zres = solve_z_subproblem(c, alpha, gamma, d, 30000, sub);
    // wf.sigma_Z is for ascending lambda_M, i.e. descending sigma
    for (std::size_t i = 0; i < d; ++i) {
      const double ref = wf.sigma_Z[i];
      if (ref <= 1e-8) continue;
      worst = std::max(worst, std::abs(zres.sigma[i] - ref) / ref);
    }
    ++done;
  }
  CheckResult out;
  out.name = "singular-value-formula";
  out.pass = done == 10 && worst <= 1e-3;
  out.detail = verify_detail::fmt("instances=%g max rel err=%.3g", static_cast<double>(done), worst);
  return out;
}

// --- collapse oracle for the unregularized baseline ----------------------
inline CheckResult check_sedsc_collapse() {
  RngState rng(404);
  double worst_obj = 0.0, worst_angle = 0.0;
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 24, d = 3;
    Matrix c = rng.gaussian_matrix(n, n);
    for (double& v : c.storage()) v *= 0.2;
    SedscOptimal ref = sedsc_optimal_rows(c, d, n);
    RngState sub = rng.split(600 + t);
    SedscDescent run = sedsc_minimize(c, d, 5000, sub);
    worst_obj = std::max(worst_obj, std::abs(run.objective - ref.objective));
    // principal angle between the rows of Z and the bottom eigenspace of M,
    // where the eigenspace absorbs near-degenerate bottom eigenvalues
    const Matrix m = m_matrix(c);
    EigenDecomposition me = sym_eigen(m);
    const double lam_tol = me.values.front() + 1e-7 * std::max(1.0, me.values.back());
    SvdDecomposition zs = svd(run.Z);
    double max_angle = 0.0;
    for (std::size_t j = 0; j < zs.singular_values.size(); ++j) {
      if (zs.singular_values[j] <= 1e-5 * zs.singular_values[0]) continue;
      double proj = 0.0;
      for (std::size_t b = 0; b < n && me.values[b] <= lam_tol; ++b) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += zs.right(i, j) * me.vectors(i, b);
        proj += dot * dot;
      }
      max_angle = std::max(max_angle, std::acos(std::min(1.0, std::sqrt(proj))));
    }
    worst_angle = std::max(worst_angle, max_angle);
  }
  CheckResult out;
  out.name = "baseline-collapse-oracle";
  out.pass = worst_obj <= 1e-6 && worst_angle < 1e-3;
  out.detail = verify_detail::fmt("max|obj gap|=%.3g max angle=%.3g rad", worst_obj, worst_angle);
  return out;
}

// --- finite-difference gradient suite ------------------------------------
namespace verify_detail {

// Composite map: raw embedding -> column normalization -> Gram -> Sinkhorn
// -> total loss. Returns value and analytic gradient w.r.t. the raw matrix.
struct CompositeEval {
  double value;
  Matrix d_raw;
};

inline CompositeEval composite_loss(const Matrix& raw, const HyperParams& hp, double tau,
                                    std::size_t sink_iters, bool want_grad) {
  EmbeddingBatch eb = normalize_columns(raw);
  const Matrix s = multiply_at_b(eb.Y, eb.Y);
  SinkhornCache cache;
  CoefficientMatrix cm = sinkhorn_project(s, tau, sink_iters, true, &cache);
  TotalLossResult tl = total_loss(eb.Y, cm.C, hp);
  CompositeEval out;
  out.value = tl.parts.total;
  if (!want_grad) return out;
  const Matrix dS = sinkhorn_backward(cache, tl.dC);
  Matrix dZ = tl.dZ;
  // Gram pullback: d/dY of <dS, Y^T Y> contributes Y (dS + dS^T)
  const std::size_t d = eb.Y.rows(), n = eb.Y.cols();
  Matrix sym(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sym(i, j) = dS(i, j) + dS(j, i);
  const Matrix from_gram = multiply(eb.Y, sym);
  for (std::size_t i = 0; i < d * n; ++i) dZ.storage()[i] += from_gram.storage()[i];
  out.d_raw = prodsc::detail::normalize_backward(raw, eb.Y, dZ);
  return out;
}

inline double fd_worst_rel(const Matrix& raw, const HyperParams& hp, double tau,
                           std::size_t sink_iters) {
  CompositeEval base = composite_loss(raw, hp, tau, sink_iters, true);
  double worst = 0.0;
  const double h = 1e-6;
  Matrix probe = raw;
  double gnorm = 0.0;
  for (double v : base.d_raw.storage()) gnorm = std::max(gnorm, std::abs(v));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double keep = probe.storage()[i];
    probe.storage()[i] = keep + h;
    const double fp = composite_loss(probe, hp, tau, sink_iters, false).value;
    probe.storage()[i] = keep - h;
    const double fm = composite_loss(probe, hp, tau, sink_iters, false).value;
    probe.storage()[i] = keep;
    const double fd = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(base.d_raw.storage()[i]), 1e-4 * gnorm});
    if (denom > 0.0) worst = std::max(worst, std::abs(fd - base.d_raw.storage()[i]) / denom);
  }
  return worst;
}

}  // namespace verify_detail

inline CheckResult check_gradient_suite() {
  RngState rng(505);
  double worst_l1 = 0.0, worst_l2 = 0.0, worst_l3 = 0.0;
  const double h = 1e-6;
  for (int t = 0; t < 50; ++t) {
    // plain l1 on a random Z
    {
      const std::size_t d = 3 + rng.next_index(4), n = 4 + rng.next_index(5);
      Matrix z = rng.gaussian_matrix(d, n);
      const double alpha = 0.2 + rng.uniform();
      L1Result res = loss_l1(z, alpha);
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double keep = z.storage()[i];
        z.storage()[i] = keep + h;
        const double fp = loss_l1(z, alpha).value;
        z.storage()[i] = keep - h;
        const double fm = loss_l1(z, alpha).value;
        z.storage()[i] = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double denom = std::max(std::abs(fd), 1e-6);
        worst_l1 = std::max(worst_l1, std::abs(fd - res.dZ.storage()[i]) / denom);
      }
    }
    // l2 through the full normalization + Sinkhorn chain (beta = 0)
    {
      const std::size_t d = 3, n = 6;
      Matrix raw = rng.gaussian_matrix(d, n);
      HyperParams hp;
      hp.alpha = 0.5 + rng.uniform();
      hp.gamma = 0.3 + rng.uniform();
      hp.beta = 0.0;
      worst_l2 = std::max(worst_l2, verify_detail::fd_worst_rel(raw, hp, 0.3, 10));
    }
    // l3 (block-diagonal term) through the |C| chain as well
    {
      const std::size_t d = 3, n = 6;
      Matrix raw = rng.gaussian_matrix(d, n);
      HyperParams hp;
      hp.alpha = 0.5 + rng.uniform();
      hp.gamma = 0.3 + rng.uniform();
      hp.beta = 0.5 + rng.uniform();
      hp.k = 2;
      worst_l3 = std::max(worst_l3, verify_detail::fd_worst_rel(raw, hp, 0.3, 10));
    }
  }
  CheckResult out;
  out.name = "finite-difference-gradients";
  out.pass = worst_l1 <= 1e-4 && worst_l2 <= 1e-4 && worst_l3 <= 1e-4;
  out.detail =
      verify_detail::fmt("rel err l1=%.3g l2-chain=%.3g l3-chain=%.3g", worst_l1, worst_l2, worst_l3);
  return out;
}

// --- Sinkhorn projection contract ----------------------------------------
inline CheckResult check_sinkhorn_contract() {
  RngState rng(606);
  double worst_sum = 0.0, worst_diag = 0.0, worst_fp = 0.0, worst_perm = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 + rng.next_index(14);
    Matrix s = rng.uniform_matrix(n, n, -1.0, 1.0);
    const double tau = 0.3 + rng.uniform();
    const std::size_t iters = 5000;  // drive the reference projection to convergence
    CoefficientMatrix cm = sinkhorn_project(s, tau, iters, true);
    for (std::size_t i = 0; i < n; ++i) {
      double rs = 0.0, cs = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        rs += cm.C(i, j);
        cs += cm.C(j, i);
      }
      worst_sum = std::max({worst_sum, std::abs(rs - 1.0), std::abs(cs - 1.0)});
      worst_diag = std::max(worst_diag, std::abs(cm.C(i, i)));
    }
    // fixed point: S = tau * log C0 for a doubly stochastic zero-diagonal C0
    {
      Matrix s2(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          s2(i, j) = i == j ? 0.0 : tau * std::log(std::max(cm.C(i, j), 1e-290));
      CoefficientMatrix again = sinkhorn_project(s2, tau, 30, true);
      for (std::size_t i = 0; i < n * n; ++i)
        worst_fp = std::max(worst_fp, std::abs(again.C.storage()[i] - cm.C.storage()[i]));
    }
    // permutation equivariance on the raw 30-iteration output
    {
      CoefficientMatrix base = sinkhorn_project(s, tau, 30, true);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm.begin(), perm.end());
      Matrix sp(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) sp(i, j) = s(perm[i], perm[j]);
      CoefficientMatrix permuted = sinkhorn_project(sp, tau, 30, true);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          worst_perm =
              std::max(worst_perm, std::abs(permuted.C(i, j) - base.C(perm[i], perm[j])));
    }
  }
  CheckResult out;
  out.name = "sinkhorn-projection-contract";
  out.pass = worst_sum <= 1e-6 && worst_diag == 0.0 && worst_fp <= 1e-9 && worst_perm <= 1e-12;
  out.detail = verify_detail::fmt("sum err=%.3g fixed-point=%.3g perm=%.3g", worst_sum, worst_fp,
                                  worst_perm) +
               verify_detail::fmt(" diag=%.3g", worst_diag);
  return out;
}

// --- metric oracles -------------------------------------------------------
namespace verify_detail {

// enumerate all set partitions of {0..n-1} as restricted-growth strings
inline void rgs_extend(LabelVector& cur, std::size_t pos, std::size_t used,
                       std::vector<LabelVector>& out) {
  if (pos == cur.size()) {
    out.push_back(cur);
    return;
  }
  for (std::size_t v = 0; v <= used; ++v) {
    cur[pos] = v;
    rgs_extend(cur, pos + 1, std::max(used, v + 1), out);
  }
}

inline std::vector<LabelVector> all_partitions(std::size_t n) {
  std::vector<LabelVector> out;
  LabelVector cur(n, 0);
  if (n == 0) return out;
  cur[0] = 0;
  rgs_extend(cur, 1, 1, out);
  return out;
}

inline double brute_accuracy(const LabelVector& pred, const LabelVector& truth) {
  const std::size_t n = pred.size();
  std::size_t k = 0;
  for (std::size_t v : pred) k = std::max(k, v + 1);
  for (std::size_t v : truth) k = std::max(k, v + 1);
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (perm[pred[i]] == truth[i]) ++hits;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return 100.0 * static_cast<double>(best) / static_cast<double>(n);
}

inline double brute_nmi(const LabelVector& pred, const LabelVector& truth) {
  const std::size_t n = pred.size();
  std::size_t k = 0;
  for (std::size_t v : pred) k = std::max(k, v + 1);
  for (std::size_t v : truth) k = std::max(k, v + 1);
  std::vector<std::vector<std::size_t>> cnt(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < n; ++i) ++cnt[pred[i]][truth[i]];
  auto h = [&](auto marginal) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double p = static_cast<double>(marginal(i)) / static_cast<double>(n);
      if (p > 0.0) s -= p * std::log(p);
    }
    return s;
  };
  const double ha = h([&](std::size_t i) {
    std::size_t s = 0;
    for (std::size_t j = 0; j < k; ++j) s += cnt[i][j];
    return s;
  });
  const double hb = h([&](std::size_t j) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < k; ++i) s += cnt[i][j];
    return s;
  });
  double mi = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t ri = 0, dummy = 0;
    (void)dummy;
    for (std::size_t j = 0; j < k; ++j) ri += cnt[i][j];
    for (std::size_t j = 0; j < k; ++j) {
      if (cnt[i][j] == 0) continue;
      std::size_t cj = 0;
      for (std::size_t ii = 0; ii < k; ++ii) cj += cnt[ii][j];
      const double pij = static_cast<double>(cnt[i][j]) / static_cast<double>(n);
      const double pi = static_cast<double>(ri) / static_cast<double>(n);
      const double pj = static_cast<double>(cj) / static_cast<double>(n);
      mi += pij * std::log(pij / (pi * pj));
    }
  }
  const double denom = 0.5 * (ha + hb);
  if (denom <= 0.0) return 100.0;
  return 100.0 * mi / denom;
}

inline double brute_sre(const Matrix& c, const LabelVector& truth) {
  const std::size_t n = c.cols();
  double acc = 0.0;
  std::size_t counted = 0;
  for (std::size_t j = 0; j < n; ++j) {
    double total = 0.0, outside = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += std::abs(c(i, j));
      if (i == j || truth[i] != truth[j]) outside += std::abs(c(i, j));
    }
    // the diagonal never counts as in-group mass
    if (total <= 0.0) continue;
    acc += outside / total;
    ++counted;
  }
  return counted == 0 ? 0.0 : 100.0 * acc / static_cast<double>(counted);
}

}  // namespace verify_detail

inline CheckResult check_metric_oracles() {
  double worst_acc = 0.0, worst_nmi = 0.0, worst_sre = 0.0;
  RngState rng(707);
  for (std::size_t n = 2; n <= 6; ++n) {
    const std::vector<LabelVector> parts = verify_detail::all_partitions(n);
    for (const LabelVector& pred : parts)
      for (const LabelVector& truth : parts) {
        worst_acc = std::max(worst_acc,
                             std::abs(accuracy(pred, truth) - verify_detail::brute_accuracy(pred, truth)));
        worst_nmi =
            std::max(worst_nmi, std::abs(nmi(pred, truth) - verify_detail::brute_nmi(pred, truth)));
      }
    for (int t = 0; t < 30; ++t) {
      const LabelVector& truth = parts[rng.next_index(parts.size())];
      Matrix c = rng.gaussian_matrix(n, n);
      worst_sre = std::max(worst_sre, std::abs(sre(c, truth) - verify_detail::brute_sre(c, truth)));
    }
  }
  // block-diagonal affinity: regularizer vanishes, spectral clustering exact
  double bd_value = 0.0, bd_acc = 0.0;
  {
    const std::size_t k = 3;
    const std::size_t sizes[k] = {12, 9, 15};
    std::size_t n = 0;
    for (std::size_t b : sizes) n += b;
    Matrix a(n, n);
    LabelVector truth;
    std::size_t off = 0, lbl = 0;
    for (std::size_t b : sizes) {
      for (std::size_t i = 0; i < b; ++i) {
        truth.push_back(lbl);
        for (std::size_t j = 0; j < b; ++j)
          if (i != j) a(off + i, off + j) = 0.4 + 0.6 * rng.uniform();
      }
      a = symmetrize(a);
      off += b;
      ++lbl;
    }
    Affinity aff{symmetrize(a)};
    L3Result l3 = loss_l3_bd(aff, k);
    bd_value = l3.value;
    RngState crng(99);
    LabelVector pred = spectral_cluster(aff, k, crng);
    bd_acc = accuracy(pred, truth);
  }
  CheckResult out;
  out.name = "metric-brute-force-oracles";
  out.pass = worst_acc == 0.0 && worst_nmi <= 1e-10 && worst_sre <= 1e-10 &&
             std::abs(bd_value) <= 1e-9 && bd_acc == 100.0;
  out.detail = verify_detail::fmt("dACC=%.3g dNMI=%.3g dSRE=%.3g", worst_acc, worst_nmi, worst_sre) +
               verify_detail::fmt(" bd-reg=%.3g bd-acc=%g", bd_value, bd_acc);
  return out;
}

// --- synthetic training runs (shared by the two trend checks) ------------
struct SyntheticRunSummary {
  double final_acc = 0.0;
  double align_first = 0.0, align_last = 0.0;
  double csc_initial = 0.0, csc_final = 0.0;
  double seconds = 0.0;
};

inline TrainConfig synthetic_train_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.alpha = std::string("auto");
  cfg.beta = 1000.0;
  cfg.gamma = 0.5;
  cfg.eta = 5e-3;
  cfg.batch_size = 200;
  cfg.feature_dim = 3;
  cfg.prefeature_dim = 100;
  cfg.epochs = 1000;
  cfg.warmup_iters = 200;
  cfg.k = 2;
  cfg.seed = seed;
  cfg.tau = 0.1;
  cfg.sinkhorn_iters = 30;
  cfg.weight_decay_f = 1e-4;
  cfg.weight_decay_h = 5e-3;
  return cfg;
}

inline SyntheticRunSummary run_synthetic_seed(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.seed = seed;
  Dataset ds = gen_synthetic(spec);
  TrainConfig cfg = synthetic_train_config(seed);
  const double t0 = verify_detail::now_seconds();
  FitResult res = fit(ds.X, ds.labels, cfg);
  SyntheticRunSummary s;
  s.seconds = verify_detail::now_seconds() - t0;
  const std::vector<DiagnosticsRow>& d = res.diagnostics;
  const std::size_t n = d.size(), tenth = std::max<std::size_t>(1, n / 10);
  for (std::size_t i = 0; i < tenth; ++i) {
    s.align_first += d[i].align_err;
    s.align_last += d[n - tenth + i].align_err;
  }
  s.align_first /= static_cast<double>(tenth);
  s.align_last /= static_cast<double>(tenth);
  s.final_acc = d.back().acc.value_or(0.0);
  s.csc_initial = d.front().csc.value_or(0.0);
  s.csc_final = d.back().csc.value_or(0.0);
  return s;
}

inline std::vector<SyntheticRunSummary> run_synthetic_seeds(std::size_t count = 10) {
  std::vector<SyntheticRunSummary> out;
  for (std::uint64_t s = 0; s < count; ++s) out.push_back(run_synthetic_seed(s));
  return out;
}

inline CheckResult check_synthetic_accuracy(const std::vector<SyntheticRunSummary>& runs) {
  std::size_t good = 0;
  double worst_time = 0.0;
  for (const SyntheticRunSummary& r : runs) {
    if (r.final_acc >= 95.0) ++good;
    worst_time = std::max(worst_time, r.seconds);
  }
  CheckResult out;
  out.name = "synthetic-reproduction-accuracy";
  out.pass = good >= 8 && worst_time < 300.0;
  out.detail = verify_detail::fmt("seeds with ACC>=95: %g/10, worst time=%.1fs",
                                  static_cast<double>(good), worst_time);
  return out;
}

// Alignment error must fall; the structured-coherence scalar must shrink
// toward zero (it approaches zero from below here, so the magnitude is the
// monotone quantity).
inline CheckResult check_trend_diagnostics(const std::vector<SyntheticRunSummary>& runs) {
  std::size_t good = 0;
  for (const SyntheticRunSummary& r : runs) {
    const bool align_ok = r.align_last < r.align_first;
    const bool csc_ok = std::abs(r.csc_final) < std::abs(r.csc_initial);
    if (align_ok && csc_ok) ++good;
  }
  CheckResult out;
  out.name = "trend-diagnostics";
  out.pass = good >= 8;
  out.detail = verify_detail::fmt("seeds with falling trends: %g/10", static_cast<double>(good));
  return out;
}

// --- determinism ----------------------------------------------------------
namespace verify_detail {

inline std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace verify_detail

inline CheckResult check_determinism(const std::string& scratch_dir) {
  SyntheticSpec spec;
  spec.seed = 3;
  Dataset ds = gen_synthetic(spec);
  TrainConfig cfg = synthetic_train_config(3);
  cfg.epochs = 12;
  cfg.warmup_iters = 50;
  const std::string d1 = scratch_dir + "/det_a", d2 = scratch_dir + "/det_b";
  std::filesystem::create_directories(d1);
  std::filesystem::create_directories(d2);
  fit(ds.X, ds.labels, cfg, d1);
  fit(ds.X, ds.labels, cfg, d2);
  const bool csv_same =
      verify_detail::slurp(d1 + "/diagnostics.csv") == verify_detail::slurp(d2 + "/diagnostics.csv");
  const bool ckpt_same =
      verify_detail::slurp(d1 + "/checkpoint.bin") == verify_detail::slurp(d2 + "/checkpoint.bin");
  const bool nonempty = !verify_detail::slurp(d1 + "/checkpoint.bin").empty();
  CheckResult out;
  out.name = "repeat-run-determinism";
  out.pass = csv_same && ckpt_same && nonempty;
  out.detail = std::string("diagnostics ") + (csv_same ? "identical" : "DIFFER") + ", checkpoint " +
               (ckpt_same ? "identical" : "DIFFER");
  return out;
}

// --- property suites for the `verify` CLI --------------------------------

inline CheckResult check_alignment_properties() {
  RngState rng(808);
  double worst_shared = 0.0;
  bool example_ok = true;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.next_index(15);
    // shared eigenbasis => commuting => alignment error 0
    Matrix q = rng.gaussian_matrix(n, n);
    // orthonormalize via Gram-Schmidt
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < j; ++p) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += q(i, j) * q(i, p);
        for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, p);
      }
      double nrm = 0.0;
      for (std::size_t i = 0; i < n; ++i) nrm += q(i, j) * q(i, j);
      nrm = std::sqrt(std::max(nrm, 1e-30));
      for (std::size_t i = 0; i < n; ++i) q(i, j) /= nrm;
    }
    Matrix g(n, n), m(n, n);
    std::vector<double> ev1(n), ev2(n);
    for (std::size_t i = 0; i < n; ++i) {
      ev1[i] = rng.uniform();
      ev2[i] = rng.uniform();
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          s1 += q(i, k) * ev1[k] * q(j, k);
          s2 += q(i, k) * ev2[k] * q(j, k);
        }
        g(i, j) = s1;
        m(i, j) = s2;
      }
    worst_shared = std::max(worst_shared, alignment_error(g, m));
  }
  {
    Matrix g(2, 2), m(2, 2);
    g(0, 0) = 1.0;
    g(1, 1) = 2.0;
    m(0, 1) = m(1, 0) = 1.0;
    example_ok = std::abs(alignment_error(g, m) - std::sqrt(2.0)) <= 1e-12;
  }
  CheckResult out;
  out.name = "alignment-error-properties";
  out.pass = worst_shared <= 1e-10 && example_ok;
  out.detail = verify_detail::fmt("shared-basis max=%.3g hand-example=%g", worst_shared,
                                  example_ok ? 1.0 : 0.0);
  return out;
}

inline CheckResult check_csc_properties() {
  RngState rng(909);
  double worst_brute = 0.0, worst_perm = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 6, d = 3;
    Matrix z = rng.gaussian_matrix(d, n);
    Matrix c = rng.gaussian_matrix(n, n);
    ClusterArrangement arr;
    arr.permutation = {0, 1, 2, 3, 4, 5};
    rng.shuffle(arr.permutation.begin(), arr.permutation.end());
    arr.block_sizes = {2, 4};
    const double v = csc_value(z, c, arr);
    // brute force: permute, compute M and G entrywise, sum off-block pairs
    Matrix zp(d, n), cp(n, n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < d; ++i) zp(i, j) = z(i, arr.permutation[j]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) cp(i, j) = c(arr.permutation[i], arr.permutation[j]);
    double brute = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t bi = i < 2 ? 0 : 1, bj = j < 2 ? 0 : 1;
        if (bi == bj) continue;
        double mij = (i == j ? 1.0 : 0.0) - cp(i, j) - cp(j, i);
        for (std::size_t k = 0; k < n; ++k) mij += cp(i, k) * cp(j, k);
        double gij = 0.0;
        for (std::size_t k = 0; k < d; ++k) gij += zp(k, i) * zp(k, j);
        brute += mij * gij;
      }
    worst_brute = std::max(worst_brute, std::abs(v - brute));
    // within-block permutation invariance: swap the two members of block 0
    ClusterArrangement arr2 = arr;
    std::swap(arr2.permutation[0], arr2.permutation[1]);
    worst_perm = std::max(worst_perm, std::abs(csc_value(z, c, arr2) - v));
  }
  CheckResult out;
  out.name = "structured-coherence-properties";
  out.pass = worst_brute <= 1e-10 && worst_perm <= 1e-10;
  out.detail = verify_detail::fmt("brute diff=%.3g within-block perm diff=%.3g", worst_brute,
                                  worst_perm);
  return out;
}

inline CheckResult check_waterfill_monotonicity() {
  RngState rng(111);
  bool ok = true;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    verify_detail::WfInstance w = verify_detail::random_wf_instance(rng);
    const std::size_t r = std::min(w.d, w.n);
    WaterfillSolution base = waterfill(w.lambda_m, w.alpha, w.gamma, w.d, w.n);
    // bump the largest eigenvalue so its position survives the re-sort
    std::vector<double> bumped = w.lambda_m;
    bumped[r - 1] += 0.5 * rng.uniform();
    WaterfillSolution after = waterfill(bumped, w.alpha, w.gamma, w.d, w.n);
    const double delta = after.lambda_G[r - 1] - base.lambda_G[r - 1];
    worst = std::max(worst, delta);
    if (delta > 1e-9) ok = false;
  }
  CheckResult out;
  out.name = "waterfill-monotonicity";
  out.pass = ok;
  out.detail = verify_detail::fmt("max allocation increase=%.3g", worst);
  return out;
}

}  // namespace prodsc
