#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "prodsc/rng.hpp"
#include "prodsc/theorylab.hpp"

using namespace prodsc;

TEST_CASE("closed-form spectrum allocation on hand instances") {
  WaterfillSolution s = waterfill({1.0, 1.0}, 1.0, 0.1, 2, 2);
  REQUIRE(s.nu == Catch::Approx(0.4).margin(1e-10));
  REQUIRE(s.lambda_G[0] == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(s.lambda_G[1] == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(s.rank == 2);

  WaterfillSolution t = waterfill({0.0, 10.0}, 1.0, 1.0, 2, 2);
  REQUIRE(t.nu == Catch::Approx(1.0 / 3.0).margin(1e-9));
  REQUIRE(t.lambda_G[0] == Catch::Approx(2.0).margin(1e-8));
  REQUIRE(t.lambda_G[1] == Catch::Approx(0.0).margin(1e-10));
  REQUIRE(t.rank == 1);
  REQUIRE(t.sigma_Z[0] == Catch::Approx(std::sqrt(2.0)).margin(1e-8));

  // trace budget and nonnegativity on random instances
  RngState rng(12);
  for (int i = 0; i < 50; ++i) {
    const std::size_t d = 2 + rng.next_index(16), n = 2 + rng.next_index(32);
    std::vector<double> lam(std::min(d, n));
    for (double& v : lam) v = std::abs(rng.gaussian());
    std::sort(lam.begin(), lam.end());
    WaterfillSolution w = waterfill(lam, rng.uniform(0.1, 1.0), rng.uniform(0.02, 1.0), d, n);
    double sum = 0.0;
    for (double v : w.lambda_G) {
      REQUIRE(v >= 0.0);
      sum += v;
    }
    REQUIRE(sum == Catch::Approx(static_cast<double>(n)).margin(1e-8));
  }
  REQUIRE_THROWS_AS(waterfill({1.0}, 1.0, 0.1, 2, 2), InfeasibleBracket);
  REQUIRE_THROWS_AS(waterfill({1.0, 1.0}, -1.0, 0.1, 2, 2), InfeasibleBracket);
}

TEST_CASE("collapse threshold arithmetic") {
  REQUIRE(collapse_threshold(10.0, 128, 1024, 1.0) == Catch::Approx(100.0 / 10.125));
  REQUIRE(collapse_threshold(2.0, 8, 4, 1.0) == Catch::Approx(4.0 / 3.0));  // d >= N
  REQUIRE(collapse_threshold(1.0, 2, 4, 2.0) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("commutator alignment error") {
  RngState rng(13);
  const Matrix m = symmetrize(rng.gaussian_matrix(4, 4));
  REQUIRE(alignment_error(m, m) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(alignment_error(Matrix{{1, 0}, {0, 2}}, Matrix{{3, 0}, {0, 4}}) ==
          Catch::Approx(0.0).margin(1e-14));
  REQUIRE(alignment_error(Matrix{{1, 0}, {0, 2}}, Matrix{{0, 1}, {1, 0}}) ==
          Catch::Approx(std::sqrt(2.0)).margin(1e-12));
  REQUIRE_THROWS_AS(alignment_error(Matrix(2, 2), Matrix(3, 3)), ShapeMismatch);
}

TEST_CASE("eigenvector correlation profile") {
  RngState rng(14);
  // shared-eigenbasis pair: correlations 1 on nonzero modes
  const Matrix b = rng.gaussian_matrix(5, 5);
  const Matrix g = multiply_a_bt(b, b);
  Matrix gm = g;
  for (double& v : gm.storage()) v *= 2.0;  // M = 2G shares eigenvectors
  std::vector<double> corr = eigen_correlation(g, gm);
  for (double v : corr) REQUIRE(v == Catch::Approx(1.0).margin(1e-8));

  // kernel mode reports 0
  Matrix gk(2, 2);
  gk(0, 0) = 1.0;  // e2 in the kernel of G
  const Matrix m2{{2, 0}, {0, 1}};
  std::vector<double> c2 = eigen_correlation(gk, m2);
  REQUIRE(c2[0] == 0.0);  // ascending order puts e2 (eigenvalue 1) first
  REQUIRE(c2[1] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("off-block coherence scalar") {
  RngState rng(15);
  const std::size_t n = 6;
  ClusterArrangement arr;
  arr.permutation = {0, 1, 2, 3, 4, 5};
  arr.block_sizes = {3, 3};

  // C = 0: diagonals of G and its block restriction coincide
  const Matrix zu = normalize_columns(rng.gaussian_matrix(3, n)).Y;
  REQUIRE(csc_value(zu, Matrix(n, n), arr) == Catch::Approx(0.0).margin(1e-12));

  // block-supported Z and C: off-block entries vanish
  Matrix zb(2, n);
  for (std::size_t j = 0; j < 3; ++j) zb(0, j) = 1.0;
  for (std::size_t j = 3; j < n; ++j) zb(1, j) = 1.0;
  Matrix cb(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && (i / 3) == (j / 3)) cb(i, j) = 0.5;
  REQUIRE(csc_value(zb, cb, arr) == Catch::Approx(0.0).margin(1e-12));

  // brute-force cross-check on random input
  for (int t = 0; t < 20; ++t) {
    const Matrix z = rng.gaussian_matrix(3, n);
    const Matrix c = rng.gaussian_matrix(n, n);
    const double got = csc_value(z, c, arr);
    const Matrix g = multiply_at_b(z, z);
    const Matrix m = m_matrix(c);
    double want = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if ((i / 3) != (j / 3)) want += m(i, j) * g(i, j);
    REQUIRE(got == Catch::Approx(want).margin(1e-10));
  }

  ClusterArrangement bad = arr;
  bad.block_sizes = {2, 3};
  REQUIRE_THROWS_AS(csc_value(zu, Matrix(n, n), bad), BadArrangement);
  bad = arr;
  bad.permutation[0] = 1;
  REQUIRE_THROWS_AS(csc_value(zu, Matrix(n, n), bad), BadArrangement);
}

TEST_CASE("analytic minimizer of the unregularized baseline") {
  // choose C so that M = diag(0.1, 5, 9)
  Matrix c = Matrix::identity(3);
  c(0, 0) -= std::sqrt(0.1);
  c(1, 1) -= std::sqrt(5.0);
  c(2, 2) -= std::sqrt(9.0);
  SedscOptimal opt = sedsc_optimal_rows(c, 2, 3);
  REQUIRE(opt.objective == Catch::Approx(0.15).margin(1e-12));
  // both rows proportional to e1 (the 0.1 eigenvector)
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(std::abs(opt.Z(i, 0)) == Catch::Approx(std::sqrt(1.5)).margin(1e-10));
    REQUIRE(opt.Z(i, 1) == Catch::Approx(0.0).margin(1e-10));
    REQUIRE(opt.Z(i, 2) == Catch::Approx(0.0).margin(1e-10));
  }

  SedscOptimal iso = sedsc_optimal_rows(Matrix(4, 4), 2, 4);
  REQUIRE(iso.objective == Catch::Approx(2.0).margin(1e-12));  // N/2

  // descent from random Z reaches the analytic value
  RngState rng(16);
  const Matrix cr = scale(rng.gaussian_matrix(8, 8), 0.2);
  SedscOptimal ref = sedsc_optimal_rows(cr, 2, 8);
  SedscDescent run = sedsc_minimize(cr, 2, 20000, rng);
  REQUIRE(run.objective - ref.objective <= 1e-6);
  REQUIRE(run.objective - ref.objective >= -1e-9);
}

TEST_CASE("first-order solution of the representation subproblem") {
  RngState rng(17);
  // gamma -> 0: all singular values equalize at sqrt(N/min{d,N})
  const Matrix c = scale(rng.gaussian_matrix(12, 12), 0.15);
  ZSubproblemResult r = solve_z_subproblem(c, 0.5, 1e-8, 3, 4000, rng);
  const double want = std::sqrt(12.0 / 3.0);
  for (double s : r.sigma) REQUIRE(s == Catch::Approx(want).epsilon(1e-2));

  // gamma far above threshold: partial collapse
  const Matrix m = m_matrix(c);
  EigenDecomposition me = sym_eigen(m);
  const double thr = collapse_threshold(0.5, 3, 12, me.values.back());
  ZSubproblemResult rc = solve_z_subproblem(c, 0.5, 50.0 * thr, 3, 6000, rng);
  REQUIRE(rc.sigma.back() < 1e-3);
}
